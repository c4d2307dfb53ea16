from typing import Dict, List, Optional, Tuple

from typing_extensions import Self

import numpy as np

from .errors import ObslabError, ProblemFormatError, VerificationFailed
from .log import log_duration, logger, set_log_level
from .settings import ObslabSettings
from .services.characteristic import CharacteristicCocycle
from .services.cochains import (
    Cochain,
    MAX_DEGREE,
    brute_force_order,
    coboundary,
    cohomology,
    is_coboundary,
    pullback,
    random_cochain,
)
from .services.exactness import verify_exactness
from .services.fixtures import fx_c2, tower_fixture
from .services.groups import CrossSection, FiniteGroup, NormalSubgroup, quotient
from .services.heisenberg import build_heisenberg_demo, demo_report
from .services.hjr import (
    ExtensionTower,
    ModularObstruction,
    build_obstruction,
    check_fiber,
    delta_hjr,
    delta_mod,
    inf_map,
    partial_map_data,
    section_transport_report,
    tables_of,
)
from .services.modules import AbelianModule, EquivariantHom, FlowModule
from .services.resolution import resolve_obstruction, resolve_three_cocycle
from .services.standard import StandardThree, is_standard_coboundary, window_check_three
from .types import GroupSpec, ModuleSpec, ProblemSpec, Report, WitnessRecord
from .utilities import (
    build_chi,
    build_cochain,
    build_flow,
    build_group,
    build_subgroup,
    load_report,
    make_report,
    replay_witness,
    witness_record,
)


def _entries(c: Cochain) -> List:
    return [[list(args), value] for args, value in c.entries()]


def _describe_group(G: FiniteGroup) -> Dict:
    orders = [G.element_order(g) for g in range(G.order)]
    return {
        "label": G.label,
        "order": G.order,
        "abelian": G.is_abelian(),
        "cyclic": max(orders) == G.order,
        "element_orders": sorted(set(orders)),
        "generators": G.generators(),
        "center": len(NormalSubgroup.center(G).members),
    }


def _describe_obstruction(ob: ModularObstruction) -> Dict:
    return {
        "G": ob.G.order,
        "N": list(ob.N.members),
        "Q": ob.section.quotient.quot.order,
        "section": ob.section.sect.tolist(),
        "cQ": _entries(ob.cocycle.cQ),
        "d1": _entries(ob.cocycle.d1),
        "nu": {str(n): ob.nu.values[i].tolist() for i, n in enumerate(ob.N.members)},
    }


class ObstructionEngine:
    """Runs one subcommand per method and turns the outcome into a Report."""

    def __init__(self, settings: ObslabSettings):
        self.settings = settings

    def __enter__(self) -> Self:
        set_log_level(self.settings.LOG_LEVEL)
        logger.debug(f"engine ready: budget {self.settings.BUDGET}, window {self.settings.FLOW_WINDOW}, seed {self.settings.SEED}")
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        if exc_type is not None:
            logger.error(f"Exception in ObstructionEngine context manager: {exc_value}")
            if not issubclass(exc_type, ObslabError):
                logger.exception(exc_value)
        return False

    def budget(self, problem: Optional[ProblemSpec] = None) -> int:
        if problem is not None and problem.budget is not None:
            return min(problem.budget, self.settings.BUDGET)
        return self.settings.BUDGET

    # -------------------------------------------------------------- inputs

    def coefficients(self, problem: Optional[ProblemSpec], group: Optional[GroupSpec] = None,
                     module: Optional[ModuleSpec] = None) -> Tuple[FiniteGroup, FlowModule]:
        group = group if group is not None else (problem.group if problem is not None else None)
        module = module if module is not None else (problem.module if problem is not None else None)
        if group is None or module is None:
            raise ProblemFormatError("a group and a module are required (--group/--module or --problem)")
        G = build_group(group)
        return G, build_flow(module, G)

    def tower(self, problem: Optional[ProblemSpec], fixture: Optional[str]) -> Tuple[ExtensionTower, Optional[CharacteristicCocycle]]:
        if fixture is not None:
            fx = tower_fixture(fixture)
            return fx.tower(), fx.chi
        if problem is None or problem.L is None:
            raise ProblemFormatError("a tower needs --fixture or a problem with 'L'")
        H, flow = self.coefficients(problem)
        L = build_subgroup(problem.L, H)
        M = build_subgroup(problem.M, H)
        tower = ExtensionTower.build(flow, L, M, section=problem.section, lift=problem.lift)
        chi = build_chi(problem.chi, tower.ctx) if problem.chi is not None else None
        return tower, chi

    def obstruction(self, problem: Optional[ProblemSpec], fixture: Optional[str], k: Optional[int] = None,
                    nu: str = "injective", modulus: Optional[int] = None,
                    validate: bool = True) -> Tuple[ModularObstruction, Optional[ExtensionTower]]:
        if k is None and fixture is not None and fixture.upper().startswith("HEIS-"):
            k = int(fixture.split("-", 1)[1])
        if k is not None:
            module = AbelianModule.cyclic(modulus if modulus is not None else k)
            _, ob = build_heisenberg_demo(k, module, w=(1,) if nu == "injective" else (0,))
            return ob, None
        if problem is not None and problem.obstruction is not None:
            return self._explicit_obstruction(problem, validate), None
        tower, chi = self.tower(problem, fixture)
        if chi is None:
            logger.info("no characteristic cocycle given, using the trivial one")
            chi = CharacteristicCocycle.trivial(tower.ctx)
        return delta_mod(chi, tower, budget=self.budget(problem)).obstruction, tower

    def _explicit_obstruction(self, problem: ProblemSpec, validate: bool) -> ModularObstruction:
        spec = problem.obstruction
        G, flow = self.coefficients(problem)
        N = NormalSubgroup.build(G, spec.N)
        q_data = quotient(G, N, label=f"{G.label}/N")
        section = CrossSection.build(q_data, spec.section) if spec.section is not None else CrossSection.minimal(q_data)
        flow_Q = flow.descend(q_data)
        flow_G = flow_Q.pullback(G, q_data.proj)
        values = np.zeros((N.order, flow.rank), dtype=np.int64)
        for e in spec.nu:
            n = e.args[0]
            if not 0 <= n < G.order or not N.contains(n):
                raise ProblemFormatError(f"obstruction.nu: element {n} is not in N")
            values[N.positions[n]] = e.value
        nu = EquivariantHom(subgroup=N, flow=flow_G, values=flow_G.module.reduce(values))
        cocycle = StandardThree(flow=flow_Q, cQ=build_cochain(spec.cQ, flow_Q), d1=build_cochain(spec.d1, flow_Q))
        if validate:
            return build_obstruction(section, cocycle, nu)
        return ModularObstruction(section=section, cocycle=cocycle, nu=nu)

    # -------------------------------------------------------------- commands

    def group_check(self, group: GroupSpec) -> Report:
        G = build_group(group)
        logger.info(f"group {G.label} of order {G.order} validated")
        return make_report("group-check", {"group": group.model_dump()}, _describe_group(G))

    def cohomology(self, degree: int, problem: Optional[ProblemSpec] = None, group: Optional[GroupSpec] = None,
                   module: Optional[ModuleSpec] = None, brute_force: bool = False) -> Report:
        G, flow = self.coefficients(problem, group, module)
        budget = self.budget(problem)
        with log_duration(f"H^{degree}"):
            result = cohomology(flow, degree, budget)
        results = {
            "group": G.label,
            "module": flow.module.describe(),
            "degree": degree,
            f"H{degree}": result.describe(),
            "invariant_factors": list(result.invariant_factors),
            "order": result.order,
            "basis": [_entries(c) for c in result.basis],
        }
        if brute_force:
            z, b = brute_force_order(flow, degree, budget)
            results["brute_force"] = {"cocycles": z, "coboundaries": b, "order": z // b}
            if z // b != result.order:
                raise VerificationFailed("Smith form and enumeration disagree", witness={"snf": result.order, "enumeration": z // b})
        arguments = {"degree": degree, "group": group.model_dump() if group else None,
                     "module": module.model_dump() if module else None, "brute_force": brute_force}
        return make_report("cohomology", arguments, results, problem=problem)

    def delta_hjr(self, problem: Optional[ProblemSpec] = None, fixture: Optional[str] = None) -> Report:
        tower, chi = self.tower(problem, fixture)
        if chi is None:
            raise ProblemFormatError("delta-hjr needs a characteristic cocycle ('chi')")
        H = tower.H
        q_data = quotient(H, tower.L, label=f"{H.label}/L")
        section = CrossSection.build(q_data, problem.section) if problem is not None and problem.section is not None \
            else CrossSection.minimal(q_data)
        c = delta_hjr(chi, section)
        witness = is_coboundary(c, self.budget(problem))
        results = {
            "Q": q_data.quot.order,
            "section": section.sect.tolist(),
            "cocycle": _entries(c),
            "trivial": witness is not None,
        }
        witnesses = [witness_record("coboundary", [c], [witness])] if witness is not None else []
        return make_report("delta-hjr", {"fixture": fixture}, results, problem=problem, witnesses=witnesses)

    def delta_mod(self, problem: Optional[ProblemSpec] = None, fixture: Optional[str] = None) -> Report:
        tower, chi = self.tower(problem, fixture)
        if chi is None:
            raise ProblemFormatError("delta-mod needs a characteristic cocycle ('chi')")
        budget = self.budget(problem)
        data = delta_mod(chi, tower, budget=budget)
        ob = data.obstruction
        failure = window_check_three(ob.cocycle, self.settings.FLOW_WINDOW)
        if failure is not None:
            raise VerificationFailed("obstruction cocycle fails the window check", witness=failure)
        a = is_standard_coboundary(ob.cocycle, budget)
        results = _describe_obstruction(ob)
        results.update({
            "window": self.settings.FLOW_WINDOW,
            "cocycle_trivial": a is not None,
            "nu_trivial": ob.nu.is_zero(),
            "zeta": data.zeta.tolist(),
        })
        witnesses = [witness_record("standard-coboundary", [ob.cocycle.cQ, ob.cocycle.d1], [a])] if a is not None else []
        return make_report("delta-mod", {"fixture": fixture}, results, problem=problem, witnesses=witnesses)

    def partial(self, problem: Optional[ProblemSpec] = None, fixture: Optional[str] = None, k: Optional[int] = None,
                nu: str = "injective", inflate: bool = True) -> Report:
        ob, tower = self.obstruction(problem, fixture, k, nu)
        budget = self.budget(problem)
        data = partial_map_data(ob)
        b = is_coboundary(data.c_G, budget)
        results = {
            "G": ob.G.order,
            "partial": _entries(data.c_G),
            "torus_order": data.c_G.flow.module.moduli[0],
            "partial_trivial": b is not None,
        }
        witnesses = []
        if b is not None:
            witnesses.append(witness_record("coboundary", [data.c_G], [b]))
        if inflate and tower is not None:
            inflated = inf_map(ob, tower.g_data)
            w = is_coboundary(inflated, budget)
            results["inflation_trivial"] = w is not None
            if w is None:
                raise VerificationFailed("inflation of the obstruction image is not a coboundary", witness={"cocycle": _entries(inflated)})
            witnesses.append(witness_record("coboundary", [inflated], [w]))
        arguments = {"fixture": fixture, "k": k, "nu": nu if k is not None else None, "inflate": inflate}
        return make_report("partial", arguments, results, problem=problem, witnesses=witnesses)

    def resolve(self, problem: Optional[ProblemSpec] = None, fixture: Optional[str] = None) -> Report:
        if fixture is not None:
            if fixture.upper() != "FX-C2":
                raise ProblemFormatError(f"resolve takes the FX-C2 fixture, got '{fixture}'")
            c = fx_c2()
        elif problem is not None and problem.cocycle is not None:
            _, flow = self.coefficients(problem)
            c = build_cochain(problem.cocycle, flow)
        else:
            raise ProblemFormatError("resolve needs a 3-cocycle ('cocycle') or --fixture FX-C2")
        system = resolve_three_cocycle(c, self.budget(problem))
        realized = delta_hjr(system.chi, system.section, flow_Q=c.flow)
        results = dict(system.summary())
        results.update({
            "H_cyclic": _describe_group(system.big)["cyclic"],
            "input": _entries(c),
            "realized": _entries(realized),
            "pullback_checked": system.pullback_witness is not None,
        })
        witnesses = [witness_record("coboundary", [c - realized], [system.witness])]
        if system.pullback_witness is not None:
            flow_H = system.pullback_witness.flow
            witnesses.append(witness_record("coboundary", [pullback(c, flow_H, system.projection)], [system.pullback_witness]))
        return make_report("resolve", {"fixture": fixture}, results, problem=problem, witnesses=witnesses)

    def resolve_obstruction(self, problem: Optional[ProblemSpec] = None, fixture: Optional[str] = None,
                            k: Optional[int] = None, nu: str = "injective") -> Report:
        ob, _ = self.obstruction(problem, fixture, k, nu)
        resolved = resolve_obstruction(ob, self.budget(problem))
        results = {
            "obstruction": _describe_obstruction(ob),
            "resolution": resolved.system.summary(),
            "L": resolved.tower.L.order,
            "M": resolved.tower.M.order,
            "chi": tables_of(resolved.chi),
            "round_trip": True,
        }
        arguments = {"fixture": fixture, "k": k, "nu": nu if k is not None else None}
        return make_report("resolve-obstruction", arguments, results, problem=problem)

    def fiber_check(self, problem: Optional[ProblemSpec] = None, fixture: Optional[str] = None,
                    k: Optional[int] = None, nu: str = "injective") -> Report:
        ob, _ = self.obstruction(problem, fixture, k, nu, validate=False)
        ok, failure = check_fiber(ob)
        arguments = {"fixture": fixture, "k": k, "nu": nu if k is not None else None}
        if not ok:
            logger.warning(f"fiber condition fails: {failure}")
            return make_report("fiber-check", arguments, {"fiber": False}, verdict_ok=False, problem=problem,
                               axiom=failure.get("axiom", "equivariance"), witness=failure,
                               detail="fiber condition fails", exit_code=1)
        return make_report("fiber-check", arguments, {"fiber": True, "obstruction": _describe_obstruction(ob)}, problem=problem)

    def section_change(self, problem: Optional[ProblemSpec] = None, fixture: Optional[str] = None,
                       k: Optional[int] = None, nu: str = "injective") -> Report:
        ob, _ = self.obstruction(problem, fixture, k, nu)
        results = section_transport_report(ob, self.budget(problem))
        arguments = {"fixture": fixture, "k": k, "nu": nu if k is not None else None}
        return make_report("section-change", arguments, results, problem=problem)

    def exactness(self, problem: Optional[ProblemSpec] = None, fixture: Optional[str] = None) -> Report:
        tower, _ = self.tower(problem, fixture)
        with log_duration("exactness"):
            report = verify_exactness(tower.flow_H, tower.L, tower.M, self.budget(problem))
        results = report.as_dict()
        results.update({"H": tower.H.order, "L": list(tower.L.members), "M": list(tower.M.members)})
        return make_report("exactness", {"fixture": fixture}, results, problem=problem)

    def heisenberg(self, k: int, nu: str = "injective", modulus: Optional[int] = None) -> Report:
        module = AbelianModule.cyclic(modulus if modulus is not None else k)
        fixture, ob = build_heisenberg_demo(k, module, w=(1,) if nu == "injective" else (0,))
        budget = self.budget()
        summary = demo_report(ob, budget)
        results = {
            "k": k,
            "module": module.describe(),
            "nu_order": fixture.nu_order(),
            "splitting": summary["verdict"],
            "necessary": summary["necessary"],
            "alternating_nonzero": summary["alternating_nonzero"],
            "candidates": summary["candidates"],
        }
        witnesses = []
        split = summary["split"]
        if split is not None:
            witnesses.append(witness_record("split", [ob.cocycle.cQ, ob.cocycle.d1], [split.a, split.b]))
        return make_report("heisenberg", {"k": k, "nu": nu, "modulus": modulus}, results, witnesses=witnesses)

    def oracle_compare(self, report_path: Optional[str] = None, problem: Optional[ProblemSpec] = None,
                       group: Optional[GroupSpec] = None, module: Optional[ModuleSpec] = None,
                       samples: int = 0) -> Report:
        if report_path is not None:
            return self._replay_report(report_path)
        G, flow = self.coefficients(problem, group, module)
        budget = self.budget(problem)
        comparisons = []
        mismatch = None
        for degree in range(MAX_DEGREE + 1):
            snf = cohomology(flow, degree, budget).order
            z, b = brute_force_order(flow, degree, budget)
            comparisons.append({"degree": degree, "snf": snf, "enumeration": z // b})
            if mismatch is None and snf != z // b:
                mismatch = comparisons[-1]

        rng = np.random.default_rng(problem.seed if problem is not None and problem.seed is not None else self.settings.SEED)
        witnesses: List[WitnessRecord] = []
        for _ in range(samples):
            c = random_cochain(2, flow, rng)
            dc = coboundary(c)
            if not coboundary(dc).is_zero():
                raise VerificationFailed("coboundary applied twice is not zero", witness={"cochain": _entries(c)})
            b = is_coboundary(dc, budget)
            if b is None:
                raise VerificationFailed("solver misses a coboundary", witness={"cochain": _entries(c)})
            witnesses.append(witness_record("coboundary", [dc], [b]))

        results = {"group": G.label, "module": flow.module.describe(), "comparisons": comparisons, "samples": samples}
        arguments = {"group": group.model_dump() if group else None, "module": module.model_dump() if module else None,
                     "samples": samples}
        if mismatch is not None:
            return make_report("oracle-compare", arguments, results, verdict_ok=False, problem=problem,
                               axiom="snf-vs-enumeration", witness=mismatch, detail="cohomology orders disagree",
                               witnesses=witnesses, exit_code=1)
        return make_report("oracle-compare", arguments, results, problem=problem, witnesses=witnesses)

    def _replay_report(self, report_path: str) -> Report:
        recorded = load_report(report_path)
        outcomes = [replay_witness(w) for w in recorded.witnesses]
        failed = [i for i, ok in enumerate(outcomes) if not ok]
        results = {"source_command": recorded.command, "source_digest": recorded.digest,
                   "witnesses": len(outcomes), "verified": len(outcomes) - len(failed)}
        arguments = {"report": recorded.digest}
        if failed:
            first = recorded.witnesses[failed[0]]
            logger.warning(f"{len(failed)} of {len(outcomes)} witnesses fail to replay")
            return make_report("oracle-compare", arguments, results, verdict_ok=False, axiom="witness-replay",
                               witness={"index": failed[0], "kind": first.kind, "targets": len(first.target)},
                               detail="recorded witness does not re-verify", exit_code=1)
        return make_report("oracle-compare", arguments, results)