from pydantic import BaseModel, Field, model_validator
from typing import Any, Dict, List, Literal, Optional

from typing_extensions import Self


class GroupSpec(BaseModel):
    family: Literal["cyclic", "heisenberg", "product", "table"]
    n: Optional[int] = None                       # cyclic order or heisenberg modulus
    factors: List["GroupSpec"] = Field(default_factory=list)
    table: Optional[List[List[int]]] = None
    label: Optional[str] = None

    @model_validator(mode="after")
    def validate_family(self) -> Self:
        if self.family in ("cyclic", "heisenberg") and (self.n is None or self.n <= 0):
            raise ValueError(f"family '{self.family}' needs a positive 'n'")
        if self.family == "product" and len(self.factors) < 2:
            raise ValueError("family 'product' needs at least two 'factors'")
        if self.family == "table" and not self.table:
            raise ValueError("family 'table' needs a non-empty 'table'")
        return self


GroupSpec.model_rebuild()


class ModuleSpec(BaseModel):
    moduli: List[int]
    theta: Optional[List[List[int]]] = None
    # full action as one matrix per group element, or images of generators keyed by element
    action: Optional[List[List[List[int]]]] = None
    action_generators: Optional[Dict[int, List[List[int]]]] = None
    torus: Optional[List[int]] = None

    @model_validator(mode="after")
    def validate_shapes(self) -> Self:
        if not self.moduli or any(m <= 0 for m in self.moduli):
            raise ValueError("'moduli' must be a non-empty list of positive integers")
        r = len(self.moduli)
        if self.theta is not None and (len(self.theta) != r or any(len(row) != r for row in self.theta)):
            raise ValueError(f"'theta' must be a {r}x{r} matrix")
        if self.action is not None and self.action_generators is not None:
            raise ValueError("give either 'action' or 'action_generators', not both")
        return self


class EntrySpec(BaseModel):
    args: List[int]
    value: List[int]


class CochainSpec(BaseModel):
    degree: int = Field(ge=0, le=3)
    entries: List[EntrySpec] = Field(default_factory=list)


class CharacteristicSpec(BaseModel):
    """Sparse tables keyed by group elements: mu[m, n], lamH[m, g], lamT[m]."""
    mu: List[EntrySpec] = Field(default_factory=list)
    lamH: List[EntrySpec] = Field(default_factory=list)
    lamT: List[EntrySpec] = Field(default_factory=list)


class ObstructionSpec(BaseModel):
    """An element of the fiber product over G >= N. Quotient elements are numbered as `quotient(G, N)` numbers them."""
    N: List[int]
    section: Optional[List[int]] = None
    cQ: CochainSpec = Field(default_factory=lambda: CochainSpec(degree=3))
    d1: CochainSpec = Field(default_factory=lambda: CochainSpec(degree=2))
    nu: List[EntrySpec] = Field(default_factory=list)    # args [n] with n in N

    @model_validator(mode="after")
    def validate_degrees(self) -> Self:
        if self.cQ.degree != 3 or self.d1.degree != 2:
            raise ValueError("'cQ' must have degree 3 and 'd1' degree 2")
        if any(len(e.args) != 1 for e in self.nu):
            raise ValueError("every 'nu' entry takes a single element of N")
        return self


class ProblemSpec(BaseModel):
    group: GroupSpec
    module: ModuleSpec
    L: Optional[List[int]] = None
    M: Optional[List[int]] = None
    section: Optional[List[int]] = None
    lift: Optional[List[int]] = None
    cocycle: Optional[CochainSpec] = None
    chi: Optional[CharacteristicSpec] = None
    obstruction: Optional[ObstructionSpec] = None
    budget: Optional[int] = None
    seed: Optional[int] = None

    @model_validator(mode="after")
    def validate_chain(self) -> Self:
        if self.M is not None and self.L is None:
            raise ValueError("'M' needs 'L' (M must lie inside L)")
        if self.chi is not None and self.L is None:
            raise ValueError("'chi' needs the subgroup 'L'")
        if self.budget is not None and self.budget <= 0:
            raise ValueError("'budget' must be positive")
        return self


class CochainRecord(BaseModel):
    degree: int
    entries: List[EntrySpec]


class WitnessRecord(BaseModel):
    """Self-describing witness: enough data to rebuild coefficients and replay the claim."""
    kind: Literal["coboundary", "standard-coboundary", "split"]
    group: List[List[int]]
    moduli: List[int]
    action: List[List[List[int]]]
    theta: List[List[int]]
    target: List[CochainRecord]
    witness: List[CochainRecord]


class Verdict(BaseModel):
    ok: bool
    axiom: Optional[str] = None
    witness: Optional[Any] = None
    detail: Optional[str] = None


class Report(BaseModel):
    command: str
    arguments: Dict[str, Any] = Field(default_factory=dict)
    digest: str
    results: Dict[str, Any] = Field(default_factory=dict)
    verdict: Verdict
    witnesses: List[WitnessRecord] = Field(default_factory=list)
    exit_code: int = 0
