import json
import re
from hashlib import sha256
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from .errors import ProblemFormatError
from .log import logger
from .services.characteristic import CharContext, CharacteristicCocycle, build_characteristic
from .services.cochains import Cochain, coboundary
from .services.groups import FiniteGroup, NormalSubgroup, cyclic, direct_product, heisenberg_mod
from .services.modules import AbelianModule, FlowModule, GroupAction, ModuleAut
from .services.standard import StandardThree, standard_coboundary
from .types import (
    CharacteristicSpec,
    CochainRecord,
    CochainSpec,
    EntrySpec,
    GroupSpec,
    ModuleSpec,
    ProblemSpec,
    Report,
    WitnessRecord,
)


def _format_validation_error(e: ValidationError) -> str:
    first = e.errors()[0]
    path = ".".join(str(p) for p in first["loc"]) or "<root>"
    return f"{path}: {first['msg']}"


def load_problem(problem_filepath: str) -> ProblemSpec:
    try:
        problem_path = Path(problem_filepath)
        if not problem_path.exists():
            raise FileNotFoundError(f"problem file not found: {problem_filepath}")

        with open(problem_path, 'r') as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise ProblemFormatError(f"line {e.lineno}, column {e.colno}: {e.msg}") from e
        try:
            return ProblemSpec(**data)
        except ValidationError as e:
            raise ProblemFormatError(_format_validation_error(e), witness={"errors": len(e.errors())}) from e
    except Exception as e:
        logger.error(f"Error loading problem from {problem_filepath}: {e}")
        raise e


def load_report(report_filepath: str) -> Report:
    try:
        with open(report_filepath, 'r') as f:
            return Report(**json.load(f))
    except ValidationError as e:
        logger.error(f"Error loading report from {report_filepath}: {e}")
        raise ProblemFormatError(_format_validation_error(e)) from e
    except Exception as e:
        logger.error(f"Error loading report from {report_filepath}: {e}")
        raise e


# ------------------------------------------------------------------ shorthand parsing

def parse_group(text: str) -> GroupSpec:
    """`cyclic:4`, `heisenberg:2`, `klein`, `product:2x2x3` or a JSON table."""
    text = text.strip()
    if text.startswith("["):
        try:
            return GroupSpec(family="table", table=json.loads(text))
        except (json.JSONDecodeError, ValidationError) as e:
            raise ProblemFormatError(f"group table: {e}") from e
    if text == "klein":
        return GroupSpec(family="product", factors=[GroupSpec(family="cyclic", n=2), GroupSpec(family="cyclic", n=2)])
    family, _, arg = text.partition(":")
    try:
        if family in ("cyclic", "heisenberg"):
            return GroupSpec(family=family, n=int(arg))
        if family == "product":
            return GroupSpec(family="product", factors=[GroupSpec(family="cyclic", n=int(n)) for n in arg.split("x")])
    except (ValueError, ValidationError) as e:
        raise ProblemFormatError(f"group '{text}': {e}") from e
    raise ProblemFormatError(f"unknown group '{text}' (use cyclic:n, heisenberg:k, klein, product:axb or a JSON table)")


def parse_module(text: str) -> ModuleSpec:
    """`Z2`, `Z2+Z4` or `2,4`."""
    parts = re.split(r"[+,]", text.replace(" ", ""))
    try:
        moduli = [int(p[1:] if p.upper().startswith("Z") else p) for p in parts if p]
        return ModuleSpec(moduli=moduli)
    except (ValueError, ValidationError) as e:
        raise ProblemFormatError(f"module '{text}': {e}") from e


# ------------------------------------------------------------------ building objects

def build_group(spec: GroupSpec) -> FiniteGroup:
    if spec.family == "cyclic":
        return cyclic(spec.n)
    if spec.family == "heisenberg":
        return heisenberg_mod(spec.n)
    if spec.family == "product":
        return direct_product([build_group(f) for f in spec.factors])
    return FiniteGroup.from_table(spec.table, label=spec.label or "G")


def build_flow(spec: ModuleSpec, group: FiniteGroup) -> FlowModule:
    module = AbelianModule(moduli=tuple(spec.moduli))
    if spec.action is not None:
        action = GroupAction.build(group, module, spec.action)
    elif spec.action_generators is not None:
        action = GroupAction.from_generators(group, module, spec.action_generators)
    else:
        action = GroupAction.trivial(group, module)
    theta = ModuleAut.build(module, spec.theta) if spec.theta is not None else None
    return FlowModule.build(module, action, theta, torus=spec.torus if spec.torus is not None else "auto")


def build_cochain(spec: CochainSpec, flow: FlowModule) -> Cochain:
    return Cochain.from_entries(spec.degree, flow, {tuple(e.args): e.value for e in spec.entries})


def build_subgroup(members: Optional[Sequence[int]], group: FiniteGroup, default: str = "trivial") -> NormalSubgroup:
    if members is None:
        return NormalSubgroup.whole(group) if default == "whole" else NormalSubgroup.trivial(group)
    return NormalSubgroup.build(group, list(members))


def _positions(members: Sequence[int], L: NormalSubgroup, what: str) -> Tuple[int, ...]:
    out = []
    for m in members:
        if not 0 <= m < L.parent.order or not L.contains(m):
            raise ProblemFormatError(f"chi.{what}: element {m} is not in L")
        out.append(int(L.positions[m]))
    return tuple(out)


def build_chi(spec: CharacteristicSpec, ctx: CharContext) -> CharacteristicCocycle:
    """Tables keyed by group elements in the document, by positions in L internally."""
    r = ctx.r
    mu = np.zeros((ctx.nL, ctx.nL, r), dtype=np.int64)
    lamH = np.zeros((ctx.nL, ctx.nH, r), dtype=np.int64)
    lamT = np.zeros((ctx.nL, r), dtype=np.int64)
    for e in spec.mu:
        if len(e.args) != 2:
            raise ProblemFormatError(f"chi.mu: entry {e.args} needs two elements of L")
        mu[_positions(e.args, ctx.L, "mu")] = e.value
    for e in spec.lamH:
        if len(e.args) != 2 or not 0 <= e.args[1] < ctx.nH:
            raise ProblemFormatError(f"chi.lamH: entry {e.args} needs an element of L and one of H")
        lamH[_positions(e.args[:1], ctx.L, "lamH") + (e.args[1],)] = e.value
    for e in spec.lamT:
        if len(e.args) != 1:
            raise ProblemFormatError(f"chi.lamT: entry {e.args} needs one element of L")
        lamT[_positions(e.args, ctx.L, "lamT")] = e.value
    return build_characteristic(ctx, mu, lamH, lamT)


# ------------------------------------------------------------------ witnesses

def cochain_record(c: Cochain) -> CochainRecord:
    return CochainRecord(degree=c.degree, entries=[EntrySpec(args=list(a), value=v) for a, v in c.entries()])


def witness_record(kind: str, target: List[Cochain], witness: List[Cochain]) -> WitnessRecord:
    flow = target[0].flow
    return WitnessRecord(
        kind=kind,
        group=flow.group.mul.tolist(),
        moduli=list(flow.module.moduli),
        action=flow.action.auts.tolist(),
        theta=flow.theta.matrix.tolist(),
        target=[cochain_record(c) for c in target],
        witness=[cochain_record(c) for c in witness],
    )


def replay_witness(record: WitnessRecord) -> bool:
    """Rebuild the coefficients and re-check the recorded claim exactly."""
    group = FiniteGroup.from_table(record.group, check_associativity=False)
    module = AbelianModule(moduli=tuple(record.moduli))
    flow = FlowModule.build(module, GroupAction.build(group, module, record.action), ModuleAut.build(module, record.theta))

    def rebuild(r: CochainRecord) -> Cochain:
        return Cochain.from_entries(r.degree, flow, {tuple(e.args): e.value for e in r.entries})

    target = [rebuild(r) for r in record.target]
    witness = [rebuild(r) for r in record.witness]
    if record.kind == "coboundary":
        return coboundary(witness[0]).equals(target[0])
    replay: StandardThree = standard_coboundary(witness[0])
    d1 = target[1] if record.kind == "standard-coboundary" else target[1] + coboundary(witness[1])
    return replay.cQ.equals(target[0]) and replay.d1.equals(d1)


# ------------------------------------------------------------------ reports

def _plain(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def compute_digest(payload: Dict[str, Any]) -> str:
    """sha256 of the canonical JSON of the inputs."""
    canonical = json.dumps(_plain(payload), sort_keys=True, separators=(",", ":"))
    return sha256(canonical.encode("utf-8")).hexdigest()


def make_report(command: str, arguments: Dict[str, Any], results: Dict[str, Any], verdict_ok: bool = True,
                problem: Optional[ProblemSpec] = None, witnesses: Optional[List[WitnessRecord]] = None,
                axiom: Optional[str] = None, witness: Any = None, detail: Optional[str] = None, exit_code: int = 0) -> Report:
    arguments = _plain({k: v for k, v in arguments.items() if v is not None})
    inputs = {"arguments": arguments, "problem": problem.model_dump() if problem is not None else None}
    return Report(
        command=command,
        arguments=arguments,
        digest=compute_digest(inputs),
        results=_plain(results),
        verdict={"ok": verdict_ok, "axiom": axiom, "witness": _plain(witness), "detail": detail},
        witnesses=witnesses or [],
        exit_code=exit_code,
    )


def render_report(report: Report, fmt: str = "text") -> str:
    if fmt == "json":
        return json.dumps(report.model_dump(), sort_keys=True, indent=2)
    lines = [f"command: {report.command}", f"digest: {report.digest}"]
    for key in sorted(report.arguments):
        lines.append(f"argument {key}: {report.arguments[key]}")
    for key in sorted(report.results):
        value = report.results[key]
        rendered = json.dumps(value, sort_keys=True) if isinstance(value, (dict, list)) else str(value)
        lines.append(f"{key}: {rendered}")
    verdict = report.verdict
    lines.append(f"verdict: {'ok' if verdict.ok else 'violation'}")
    if verdict.detail:
        lines.append(f"detail: {verdict.detail}")
    if verdict.axiom:
        lines.append(f"axiom: {verdict.axiom}")
    if verdict.witness is not None:
        lines.append(f"witness: {json.dumps(verdict.witness, sort_keys=True)}")
    lines.append(f"witnesses: {len(report.witnesses)}")
    return "\n".join(lines)
