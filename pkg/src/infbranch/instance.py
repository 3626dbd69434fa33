"""MIP data model, free-format MPS I/O and perturbed instance series."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

SERIES_MODES = ("bnd", "obj", "rhs", "mat", "combined")
SIDECAR = "series.json"

INF = math.inf


class MpsError(ValueError):
    """Malformed MPS input; ``line`` is 1-based (0 when not tied to a line)."""

    def __init__(self, line: int, message: str):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}" if line else message)


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True).reshape(-1)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MipInstance:
    """min c^T x  s.t.  row_lower <= A x <= row_upper,  var_lower <= x <= var_upper.

    ``A`` is kept as a canonical CSR matrix (sorted indices, no explicit zeros).
    Arrays are made read-only on construction.
    """

    name: str
    objective: np.ndarray
    A: sp.csr_matrix
    row_lower: np.ndarray
    row_upper: np.ndarray
    var_lower: np.ndarray
    var_upper: np.ndarray
    integer: np.ndarray
    col_names: tuple = field(default=())
    row_names: tuple = field(default=())

    def __post_init__(self):
        n = len(np.asarray(self.objective).reshape(-1))
        A = sp.csr_matrix(self.A, dtype=float, copy=True)
        m = A.shape[0]
        if A.shape[1] != n:
            raise ValueError(f"A has {A.shape[1]} columns, objective has {n}")
        A.sum_duplicates()
        A.eliminate_zeros()
        A.sort_indices()
        for arr in (A.data, A.indices, A.indptr):
            arr.setflags(write=False)
        set_ = object.__setattr__
        set_(self, "A", A)
        set_(self, "objective", _frozen(self.objective, float))
        set_(self, "row_lower", _frozen(self.row_lower, float))
        set_(self, "row_upper", _frozen(self.row_upper, float))
        set_(self, "var_lower", _frozen(self.var_lower, float))
        set_(self, "var_upper", _frozen(self.var_upper, float))
        set_(self, "integer", _frozen(self.integer, bool))
        if len(self.row_lower) != m or len(self.row_upper) != m:
            raise ValueError("row bound vectors must have one entry per row")
        if not (len(self.var_lower) == len(self.var_upper) == len(self.integer) == n):
            raise ValueError("variable vectors must have one entry per column")
        if np.any(self.row_lower > self.row_upper):
            raise ValueError("row_lower > row_upper")
        if np.any(self.var_lower > self.var_upper):
            raise ValueError("var_lower > var_upper")
        if np.any(np.isinf(self.row_lower) & np.isinf(self.row_upper)):
            raise ValueError("every row needs at least one finite bound")
        if np.any(self.row_lower == INF) or np.any(self.row_upper == -INF):
            raise ValueError("row bounds point the wrong way")
        if np.any(self.var_lower == INF) or np.any(self.var_upper == -INF):
            raise ValueError("variable bounds point the wrong way")
        if not np.all(np.isfinite(self.objective)) or not np.all(np.isfinite(A.data)):
            raise ValueError("objective and matrix entries must be finite")
        if not self.col_names:
            set_(self, "col_names", tuple(f"x{j + 1}" for j in range(n)))
        if not self.row_names:
            set_(self, "row_names", tuple(f"r{k + 1}" for k in range(m)))
        set_(self, "col_names", tuple(self.col_names))
        set_(self, "row_names", tuple(self.row_names))
        if len(self.col_names) != n or len(self.row_names) != m:
            raise ValueError("name lists do not match the problem shape")

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.A.shape[0]

    def replace(self, **changes) -> "MipInstance":
        fields = dict(
            name=self.name, objective=self.objective, A=self.A,
            row_lower=self.row_lower, row_upper=self.row_upper,
            var_lower=self.var_lower, var_upper=self.var_upper,
            integer=self.integer, col_names=self.col_names, row_names=self.row_names,
        )
        fields.update(changes)
        return MipInstance(**fields)


def instances_equal(a: MipInstance, b: MipInstance, rtol: float = 0.0) -> bool:
    """Field-by-field comparison; ``rtol`` applies to all numeric vectors."""

    def close(x, y):
        x, y = np.asarray(x), np.asarray(y)
        if x.shape != y.shape:
            return False
        same_inf = np.array_equal(np.isinf(x), np.isinf(y)) and np.array_equal(
            x[np.isinf(x)], y[np.isinf(y)]
        )
        fx, fy = x[np.isfinite(x)], y[np.isfinite(y)]
        return same_inf and bool(np.all(np.abs(fx - fy) <= rtol * np.maximum(np.abs(fx), np.abs(fy))))

    return (
        a.name == b.name
        and a.col_names == b.col_names
        and a.row_names == b.row_names
        and a.A.shape == b.A.shape
        and np.array_equal(a.A.indptr, b.A.indptr)
        and np.array_equal(a.A.indices, b.A.indices)
        and close(a.A.data, b.A.data)
        and close(a.objective, b.objective)
        and close(a.row_lower, b.row_lower)
        and close(a.row_upper, b.row_upper)
        and close(a.var_lower, b.var_lower)
        and close(a.var_upper, b.var_upper)
        and np.array_equal(a.integer, b.integer)
    )


# ---------------------------------------------------------------------------
# MPS reading
# ---------------------------------------------------------------------------

_SECTION_ORDER = ("NAME", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA")


def _number(tok: str, lineno: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise MpsError(lineno, f"non-numeric value {tok!r}") from None
    if math.isnan(v):
        raise MpsError(lineno, f"non-numeric value {tok!r}")
    return v


def parse_mps(text) -> MipInstance:
    """Parse free-format MPS from ``str`` or ``bytes``."""
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("ascii", errors="replace")

    name = ""
    section = None
    rank = -1
    obj_row = None
    row_index: dict[str, int] = {}
    row_sense: list[str] = []
    free_rows: set[str] = set()
    col_index: dict[str, int] = {}
    cols: list[dict] = []  # per column: {"int": bool, "entries": {row: val}, "obj": float}
    rhs: dict[int, float] = {}
    ranges: dict[int, float] = {}
    lower: dict[int, float] = {}
    upper: dict[int, float] = {}
    explicit_lower: set[int] = set()
    forced_int: set[int] = set()
    in_int = False
    ended = False

    def row_of(tok, lineno):
        if tok == obj_row:
            return -1
        if tok in free_rows:
            return None
        try:
            return row_index[tok]
        except KeyError:
            raise MpsError(lineno, f"unknown row {tok!r}") from None

    def col_of(tok, lineno):
        try:
            return col_index[tok]
        except KeyError:
            raise MpsError(lineno, f"unknown column {tok!r}") from None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        if not line.strip() or line.lstrip().startswith("*"):
            continue
        if ended:
            raise MpsError(lineno, "content after ENDATA")
        tokens = line.split()
        if not raw[0].isspace():
            head = tokens[0].upper()
            if head not in _SECTION_ORDER:
                raise MpsError(lineno, f"unknown section {tokens[0]!r}")
            new_rank = _SECTION_ORDER.index(head)
            if new_rank <= rank or (head != "NAME" and rank < 1 and head != "ROWS"):
                raise MpsError(lineno, f"section {head} out of order")
            if head in ("RHS", "RANGES", "BOUNDS", "ENDATA") and rank < 2:
                raise MpsError(lineno, f"section {head} before COLUMNS")
            rank = new_rank
            section = head
            if head == "NAME":
                name = " ".join(tokens[1:])
            elif head == "ENDATA":
                ended = True
            continue

        if section is None or section == "NAME":
            raise MpsError(lineno, "data line outside of a section")

        if section == "ROWS":
            if len(tokens) != 2:
                raise MpsError(lineno, "ROWS entries need a type and a name")
            kind, rname = tokens[0].upper(), tokens[1]
            if kind not in ("N", "L", "G", "E"):
                raise MpsError(lineno, f"unknown row type {tokens[0]!r}")
            if rname in row_index or rname == obj_row or rname in free_rows:
                raise MpsError(lineno, f"duplicate row {rname!r}")
            if kind == "N":
                if obj_row is None:
                    obj_row = rname
                else:
                    free_rows.add(rname)
            else:
                row_index[rname] = len(row_sense)
                row_sense.append(kind)

        elif section == "COLUMNS":
            if len(tokens) >= 3 and tokens[1].strip("'\"").upper() == "MARKER":
                marker = tokens[2].strip("'\"").upper()
                if marker == "INTORG":
                    in_int = True
                elif marker == "INTEND":
                    in_int = False
                else:
                    raise MpsError(lineno, f"unknown marker {tokens[2]!r}")
                continue
            if len(tokens) not in (3, 5):
                raise MpsError(lineno, "COLUMNS entries need column, row, value pairs")
            cname = tokens[0]
            if cname not in col_index:
                col_index[cname] = len(cols)
                cols.append({"int": in_int, "entries": {}, "obj": 0.0})
            col = cols[col_index[cname]]
            for rtok, vtok in zip(tokens[1::2], tokens[2::2]):
                k = row_of(rtok, lineno)
                v = _number(vtok, lineno)
                if k is None:
                    continue
                if k == -1:
                    if "obj_seen" in col:
                        raise MpsError(lineno, f"duplicate entry for {cname!r} in row {rtok!r}")
                    col["obj_seen"] = True
                    col["obj"] = v
                else:
                    if k in col["entries"]:
                        raise MpsError(lineno, f"duplicate entry for {cname!r} in row {rtok!r}")
                    col["entries"][k] = v

        elif section in ("RHS", "RANGES"):
            body = tokens[1:] if len(tokens) % 2 == 1 else tokens
            if not body or len(body) % 2:
                raise MpsError(lineno, f"malformed {section} entry")
            target = rhs if section == "RHS" else ranges
            for rtok, vtok in zip(body[0::2], body[1::2]):
                k = row_of(rtok, lineno)
                v = _number(vtok, lineno)
                if k is None or (k == -1 and section == "RHS"):
                    continue  # objective constant / free row
                if k == -1:
                    raise MpsError(lineno, "RANGES on the objective row")
                target[k] = v

        elif section == "BOUNDS":
            kind = tokens[0].upper()
            valued = kind in ("LO", "UP", "FX", "LI", "UI")
            if kind not in ("LO", "UP", "FX", "BV", "MI", "PL", "LI", "UI", "FR"):
                raise MpsError(lineno, f"unknown bound type {tokens[0]!r}")
            if valued:
                if len(tokens) == 4:
                    cname, vtok = tokens[2], tokens[3]
                elif len(tokens) == 3:
                    cname, vtok = tokens[1], tokens[2]
                else:
                    raise MpsError(lineno, f"malformed {kind} bound")
                v = _number(vtok, lineno)
            else:
                if len(tokens) == 3 or (kind == "BV" and len(tokens) == 4):
                    cname = tokens[2]
                elif len(tokens) == 2:
                    cname = tokens[1]
                else:
                    raise MpsError(lineno, f"malformed {kind} bound")
                v = None
            j = col_of(cname, lineno)
            if kind in ("LO", "LI"):
                lower[j] = v
                explicit_lower.add(j)
            elif kind in ("UP", "UI"):
                upper[j] = v
                if v < 0 and j not in explicit_lower:
                    lower[j] = -INF
            elif kind == "FX":
                lower[j] = upper[j] = v
                explicit_lower.add(j)
            elif kind == "BV":
                lower[j], upper[j] = 0.0, 1.0
                explicit_lower.add(j)
            elif kind == "MI":
                lower[j] = -INF
                explicit_lower.add(j)
            elif kind == "PL":
                upper[j] = INF
            elif kind == "FR":
                lower[j], upper[j] = -INF, INF
                explicit_lower.add(j)
            if kind in ("LI", "UI", "BV"):
                forced_int.add(j)

    if not ended:
        raise MpsError(0, "missing ENDATA")
    if rank < 2:
        raise MpsError(0, "missing ROWS/COLUMNS sections")

    n, m = len(cols), len(row_sense)
    c = np.array([col["obj"] for col in cols], dtype=float)
    indptr, indices, data = [0], [], []
    by_row: list[list[tuple[int, float]]] = [[] for _ in range(m)]
    for j, col in enumerate(cols):
        for k, v in col["entries"].items():
            if v != 0.0:
                by_row[k].append((j, v))
    for entries in by_row:
        entries.sort()
        indices.extend(j for j, _ in entries)
        data.extend(v for _, v in entries)
        indptr.append(len(indices))
    A = sp.csr_matrix(
        (np.array(data, float), np.array(indices, np.int64), np.array(indptr, np.int64)),
        shape=(m, n),
    )

    rl = np.full(m, -INF)
    ru = np.full(m, INF)
    for k, sense in enumerate(row_sense):
        b = rhs.get(k, 0.0)
        r = ranges.get(k)
        if sense == "L":
            ru[k] = b
            if r is not None:
                rl[k] = b - abs(r)
        elif sense == "G":
            rl[k] = b
            if r is not None:
                ru[k] = b + abs(r)
        else:
            rl[k] = ru[k] = b
            if r is not None:
                if r > 0:
                    ru[k] = b + r
                else:
                    rl[k] = b + r

    lo = np.zeros(n)
    up = np.full(n, INF)
    for j, v in lower.items():
        lo[j] = v
    for j, v in upper.items():
        up[j] = v
    bad = np.nonzero(lo > up)[0]
    if len(bad):
        raise MpsError(0, f"inconsistent bounds for column {list(col_index)[bad[0]]!r}")
    integer = np.array([col["int"] or j in forced_int for j, col in enumerate(cols)], dtype=bool)

    return MipInstance(
        name=name, objective=c, A=A, row_lower=rl, row_upper=ru,
        var_lower=lo, var_upper=up, integer=integer,
        col_names=tuple(col_index), row_names=tuple(row_index),
    )


# ---------------------------------------------------------------------------
# MPS writing
# ---------------------------------------------------------------------------

def _fmt(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def write_mps(inst: MipInstance) -> bytes:
    """Serialize as free-format MPS. ``parse_mps`` inverts this."""
    obj = "OBJ"
    while obj in inst.row_names:
        obj += "_"
    out = [f"NAME {inst.name}".rstrip(), "ROWS", f" N  {obj}"]
    rl, ru = inst.row_lower, inst.row_upper
    senses = []
    for k, rname in enumerate(inst.row_names):
        if rl[k] == ru[k]:
            s = "E"
        elif math.isinf(rl[k]) or not math.isinf(ru[k]):
            s = "L"
        else:
            s = "G"
        senses.append(s)
        out.append(f" {s}  {rname}")

    out.append("COLUMNS")
    At = inst.A.tocsc()
    At.sort_indices()
    in_int = False
    marker = 0
    for j, cname in enumerate(inst.col_names):
        if inst.integer[j] != in_int:
            tag = "INTORG" if inst.integer[j] else "INTEND"
            out.append(f"    MARKER{marker} 'MARKER' '{tag}'")
            marker += 1
            in_int = bool(inst.integer[j])
        lo, hi = At.indptr[j], At.indptr[j + 1]
        if inst.objective[j] != 0.0 or lo == hi:
            out.append(f"    {cname}  {obj}  {_fmt(inst.objective[j])}")
        for k, v in zip(At.indices[lo:hi], At.data[lo:hi]):
            out.append(f"    {cname}  {inst.row_names[k]}  {_fmt(v)}")
    if in_int:
        out.append(f"    MARKER{marker} 'MARKER' 'INTEND'")

    out.append("RHS")
    for k, rname in enumerate(inst.row_names):
        b = rl[k] if senses[k] == "G" else ru[k]
        if b != 0.0:
            out.append(f"    RHS  {rname}  {_fmt(b)}")
    ranged = [
        k for k in range(inst.m)
        if senses[k] == "L" and not math.isinf(rl[k])
    ]
    if ranged:
        out.append("RANGES")
        for k in ranged:
            out.append(f"    RNG  {inst.row_names[k]}  {_fmt(ru[k] - rl[k])}")

    bounds = []
    for j, cname in enumerate(inst.col_names):
        lo, hi = inst.var_lower[j], inst.var_upper[j]
        if lo == hi:
            bounds.append(f" FX BND  {cname}  {_fmt(lo)}")
        elif math.isinf(lo) and math.isinf(hi):
            bounds.append(f" FR BND  {cname}")
        else:
            if math.isinf(lo):
                bounds.append(f" MI BND  {cname}")
            elif lo != 0.0:
                bounds.append(f" LO BND  {cname}  {_fmt(lo)}")
            if not math.isinf(hi):
                bounds.append(f" UP BND  {cname}  {_fmt(hi)}")
    if bounds:
        out.append("BOUNDS")
        out.extend(bounds)
    out.append("ENDATA")
    return ("\n".join(out) + "\n").encode("ascii")


def read_mps(path) -> MipInstance:
    return parse_mps(Path(path).read_bytes())


def save_mps(inst: MipInstance, path) -> None:
    Path(path).write_bytes(write_mps(inst))


# ---------------------------------------------------------------------------
# Series generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeriesSpec:
    base_instance: MipInstance
    mode: str = "obj"
    count: int = 50
    epsilon: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.mode not in SERIES_MODES:
            raise ValueError(f"mode must be one of {SERIES_MODES}, got {self.mode!r}")
        if self.count < 1:
            raise ValueError("count must be >= 1")
        # epsilon = 0 is allowed: it yields copies of the base
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must lie in [0, 1)")


def _perturb_pairs(lo, hi, rng, eps, integral=None):
    """Multiply finite entries of a (lower, upper) pair by U[1-eps, 1+eps] factors.

    A pair with lower == upper shares one factor so it stays an equality.
    Integral entries round outward; pairs that cross are re-sorted.
    """
    k = len(lo)
    f_lo = rng.uniform(1.0 - eps, 1.0 + eps, size=k)
    f_hi = rng.uniform(1.0 - eps, 1.0 + eps, size=k)
    tied = lo == hi
    f_hi[tied] = f_lo[tied]
    new_lo = np.where(np.isfinite(lo), lo * f_lo, lo)
    new_hi = np.where(np.isfinite(hi), hi * f_hi, hi)
    swap = new_lo > new_hi
    new_lo[swap], new_hi[swap] = new_hi[swap].copy(), new_lo[swap].copy()
    if integral is not None:
        new_lo = np.where(integral & np.isfinite(new_lo), np.floor(new_lo), new_lo)
        new_hi = np.where(integral & np.isfinite(new_hi), np.ceil(new_hi), new_hi)
    return new_lo, new_hi


def perturb(base: MipInstance, mode: str, epsilon: float, rng: np.random.Generator,
            name: str | None = None) -> MipInstance:
    parts = ("bnd", "obj", "rhs", "mat") if mode == "combined" else (mode,)
    c = base.objective.copy()
    A = base.A.copy()
    rl, ru = base.row_lower.copy(), base.row_upper.copy()
    vl, vu = base.var_lower.copy(), base.var_upper.copy()
    # fixed draw order keeps each mode's stream independent of the others
    for part in ("bnd", "obj", "rhs", "mat"):
        if part not in parts:
            continue
        if part == "obj":
            f = rng.uniform(1.0 - epsilon, 1.0 + epsilon, size=len(c))
            c = np.where(c != 0.0, c * f, c)
        elif part == "rhs":
            rl, ru = _perturb_pairs(rl, ru, rng, epsilon)
        elif part == "bnd":
            vl, vu = _perturb_pairs(vl, vu, rng, epsilon, integral=base.integer)
        elif part == "mat":
            f = rng.uniform(1.0 - epsilon, 1.0 + epsilon, size=A.nnz)
            A.data = A.data * f
    return base.replace(
        name=name if name is not None else base.name,
        objective=c, A=A, row_lower=rl, row_upper=ru, var_lower=vl, var_upper=vu,
    )


def generate_series(spec: SeriesSpec) -> list[MipInstance]:
    """Instance ``i`` (1-based) depends only on ``(spec.seed, i)``."""
    base = spec.base_instance
    stem = base.name or "instance"
    out = []
    for i in range(1, spec.count + 1):
        rng = np.random.default_rng([spec.seed, i])
        out.append(perturb(base, spec.mode, spec.epsilon, rng, name=f"{stem}_{i:03d}"))
    return out


def write_series(spec: SeriesSpec, out_dir, instances=None) -> Path:
    """Write ``<name>_<i>.mps`` files, a copy of the base and a JSON sidecar."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base_bytes = write_mps(spec.base_instance)
    if instances is None:
        # generate from the written base so the sidecar reproduces the files exactly
        canonical = parse_mps(base_bytes)
        instances = generate_series(
            SeriesSpec(canonical, spec.mode, spec.count, spec.epsilon, spec.seed)
        )
    (out_dir / "base.mps").write_bytes(base_bytes)
    files = []
    for inst in instances:
        fname = f"{inst.name}.mps"
        save_mps(inst, out_dir / fname)
        files.append(fname)
    meta = {
        "base": "base.mps",
        "mode": spec.mode,
        "count": spec.count,
        "epsilon": spec.epsilon,
        "seed": spec.seed,
        "files": files,
    }
    (out_dir / SIDECAR).write_text(json.dumps(meta, indent=2) + "\n")
    return out_dir


def load_series(path) -> list[tuple[str, MipInstance]]:
    """Load a manifest directory (sidecar order) or a directory of ``*.mps`` files.

    A plain text file is read as one MPS path per line.
    """
    path = Path(path)
    if path.is_dir():
        sidecar = path / SIDECAR
        if sidecar.exists():
            files = [path / f for f in json.loads(sidecar.read_text())["files"]]
        else:
            files = sorted(p for p in path.glob("*.mps") if p.name != "base.mps")
    elif path.is_file():
        files = [
            (path.parent / line.strip()) for line in path.read_text().splitlines()
            if line.strip() and not line.startswith("#")
        ]
    else:
        raise FileNotFoundError(f"no such manifest: {path}")
    if not files:
        raise ValueError(f"manifest {path} lists no instances")
    return [(f.stem, read_mps(f)) for f in files]


def regenerate_series(manifest_dir) -> list[MipInstance]:
    manifest_dir = Path(manifest_dir)
    meta = json.loads((manifest_dir / SIDECAR).read_text())
    base = read_mps(manifest_dir / meta["base"])
    spec = SeriesSpec(base, meta["mode"], meta["count"], meta["epsilon"], meta["seed"])
    return generate_series(spec)
