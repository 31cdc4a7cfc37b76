"""Command-line front-end.

Every subcommand reads either a built-in generator (``--builtin``) or a JSON
file (``--input``), runs one pipeline and writes a CSV or JSON table to
``--output`` (stdout when omitted).  Errors are reported on stderr as
``{"error": code, "detail": message}`` with exit status 2 for bad input
and 3 for numerical failures.
"""
import argparse
import inspect
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import bundle, curves, gstructure, surfaces
from .errors import CartanFramesError, ComputeError, ConfigError, InputError
from .linalg_core import (
    GroupTag,
    StructureTensor,
    TensorKind,
    matrix_from_json,
    matrix_to_json,
    random_group_element,
)
from .plotting import emit_plot

COMMANDS = ("curve", "surface", "normalize", "orbit", "fiber", "bundle-check", "reduce")
DEFAULT_SEED = 42
THREADS_ENV = "CARTAN_FRAMES_THREADS"

KIND_NAMES = {
    "metric": TensorKind.METRIC,
    "complex": TensorKind.OPERATOR,
    "symplectic": TensorKind.TWO_FORM,
    "distribution": TensorKind.SUBSPACE,
    "vector": TensorKind.VECTOR,
}
KIND_LABELS = {v: k for k, v in KIND_NAMES.items()}

# generator parameters exposed as flags, by destination name
CURVE_PARAMS = ("r", "a", "b", "n", "length", "turns", "clockwise", "closed")
SURFACE_PARAMS = ("r", "a", "b", "c", "R", "n", "n2", "chart", "name", "size", "height", "vmax")


@dataclass
class RunConfig:
    command: str
    builtin: Optional[str] = None
    input: Optional[str] = None
    output: Optional[str] = None
    format: Optional[str] = None
    plot: Optional[str] = None
    tol: Optional[float] = None
    seed: int = DEFAULT_SEED
    include_boundary: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.tol is not None and not self.tol > 0:
            raise ConfigError("--tol must be positive")


# --------------------------------------------------------------------------
# serialization


def _clean(obj):
    """Convert numpy values to JSON-ready Python objects, NaN/inf to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


def to_json(obj):
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def _csv_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def to_csv(columns):
    """CSV text from an ordered mapping of equal-length columns."""
    names = list(columns)
    rows = zip(*(columns[k] for k in names))
    buf = io.StringIO(newline="")
    buf.write(",".join(names) + "\n")
    for row in rows:
        buf.write(",".join(_csv_cell(v) for v in row) + "\n")
    return buf.getvalue()


def write_atomic(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = os.path.abspath(path)
    directory = os.path.dirname(path)
    if not os.path.isdir(directory):
        raise ConfigError(f"output directory {directory!r} does not exist")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(cfg, text, stdout):
    if cfg.output:
        write_atomic(cfg.output, text)
    else:
        stdout.write(text)


def _load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"input file {path!r} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def _parse_json_arg(text, what):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what}: invalid JSON ({exc})") from None


def _need(doc, key, where):
    if not isinstance(doc, dict) or key not in doc:
        raise ConfigError(f"{where}: missing key {key!r}")
    return doc[key]


def _one_source(cfg, other=None):
    given = [x for x in (cfg.builtin, cfg.input, other) if x is not None]
    if len(given) != 1:
        raise ConfigError("exactly one input source is required")


def _generator_call(table, name, params, what):
    try:
        gen = table[name]
    except KeyError:
        raise ConfigError(f"unknown {what} {name!r}; choose from {sorted(table)}") from None
    accepted = inspect.signature(gen).parameters
    extra = sorted(set(params) - set(accepted))
    if extra:
        raise ConfigError(f"{what} {name!r} does not take {', '.join('--' + e for e in extra)}")
    try:
        return gen(**params)
    except CartanFramesError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


# --------------------------------------------------------------------------
# curve / surface


def _load_curve(cfg):
    _one_source(cfg)
    if cfg.builtin:
        return _generator_call(curves.BUILTINS, cfg.builtin, cfg.params, "curve")
    doc = _load_json(cfg.input)
    return curves.SampledCurve(_need(doc, "points", cfg.input), doc.get("param"),
                               bool(doc.get("closed", False)))


def run_curve(cfg, stdout):
    c = _load_curve(cfg)
    if not curves.is_unit_speed(c, 1e-8):
        c = curves.arclength_reparametrize(c)
    cols = {}
    if c.dim == 2:
        data = curves.frenet_frame_2d(c)
        cols = {"s": data.s, "k": data.k}
    else:
        floor = cfg.tol if cfg.tol is not None else curves.CURVATURE_FLOOR
        data = curves.frenet_3d(c, strict=False, floor=floor)
        cols = {"s": data.s, "k": data.k, "tau": data.tau}
    cols["boundary"] = data.boundary
    fmt = cfg.format or "csv"
    _emit(cfg, to_csv(cols) if fmt == "csv" else to_json(cols), stdout)
    if cfg.plot:
        write_atomic(cfg.plot, emit_plot(data.s, data.k, title="curvature", xlabel="s", ylabel="k"))


def _load_surface(cfg):
    _one_source(cfg)
    if cfg.builtin:
        params = {k: v for k, v in cfg.params.items() if k != "dump"}
        return _generator_call(surfaces.BUILTINS, cfg.builtin, params, "surface")
    doc = _load_json(cfg.input)
    periodic = doc.get("periodic", [False, False])
    return surfaces.SampledSurface(_need(doc, "grid", cfg.input), _need(doc, "u1", cfg.input),
                                   _need(doc, "u2", cfg.input), tuple(periodic))


def run_surface(cfg, stdout):
    s = _load_surface(cfg)
    rtol = cfg.tol if cfg.tol is not None else surfaces.WEINGARTEN_RTOL
    data = surfaces.derivation_coefficients(s, check=not cfg.include_boundary, rtol=rtol)
    K, H = surfaces.gauss_mean(s, cfg.include_boundary, data=data)
    keep = np.ones(s.shape, dtype=bool) if cfg.include_boundary else data.interior
    I, J = np.nonzero(keep)
    cols = {"i": I, "j": J, "u1": s.u1[I], "u2": s.u2[J], "K": K[I, J], "H": H[I, J]}
    if cfg.params.get("dump"):
        for k in range(2):
            for a in range(2):
                for b in range(2):
                    cols[f"Gamma_{k + 1}{a + 1}{b + 1}"] = data.Gamma[I, J, k, a, b]
        for a in range(2):
            for b in range(2):
                cols[f"h_{a + 1}{b + 1}"] = data.h_lower[I, J, a, b]
    fmt = cfg.format or "csv"
    _emit(cfg, to_csv(cols) if fmt == "csv" else to_json(cols), stdout)
    if cfg.plot:
        j = s.shape[1] // 2
        write_atomic(cfg.plot, emit_plot(s.u1, K[:, j], title=f"Gaussian curvature at u2 = {s.u2[j]:.6g}",
                                         xlabel="u1", ylabel="K"))


# --------------------------------------------------------------------------
# structure tensors


def _tensor_doc(cfg):
    data = cfg.params.get("data")
    kind = cfg.params.get("kind")
    if cfg.input is not None:
        if data is not None or kind is not None:
            raise ConfigError("exactly one input source is required")
        return _load_json(cfg.input)
    if data is None or kind is None:
        raise ConfigError("give --kind and --data, or --input")
    return {"kind": kind, "data": _parse_json_arg(data, "--data")}


def _tensor_from_doc(doc, where):
    name = _need(doc, "kind", where)
    if name not in KIND_NAMES:
        raise ConfigError(f"unknown kind {name!r}; choose from {sorted(KIND_NAMES)}")
    return StructureTensor(KIND_NAMES[name], np.asarray(_need(doc, "data", where), dtype=float))


def run_normalize(cfg, stdout):
    doc = _tensor_doc(cfg)
    where = cfg.input or "--data"
    t = _tensor_from_doc(doc, where)
    tol = cfg.tol if cfg.tol is not None else float(doc.get("tol", gstructure.ADAPTED_TOL))
    E = gstructure.normalize(t)
    out = {
        "kind": doc["kind"],
        "data": t.data,
        "orbit": gstructure.orbit_classify(t).label,
        "adapted_coframe": matrix_to_json(E.mat),
        "residual": gstructure.adaptation_residual(E, t),
        "stabilizer": gstructure.stabilizer_tag(t).to_json(),
        "tol": tol,
    }
    # a previous output fed back in: check the coframe it carries
    if "adapted_coframe" in doc:
        given = matrix_from_json(doc["adapted_coframe"])
        res = gstructure.adaptation_residual(given, t)
        out["input_residual"] = res
        out["input_adapted"] = res <= tol
    _json_only(cfg)
    _emit(cfg, to_json(out), stdout)


def run_orbit(cfg, stdout):
    doc = _tensor_doc(cfg)
    t = _tensor_from_doc(doc, cfg.input or "--data")
    tol = cfg.tol if cfg.tol is not None else gstructure.EXACT_TOL
    oc = gstructure.orbit_classify(t, tol)
    out = {"kind": doc["kind"], "orbit": oc.label, "canonical": oc.is_canonical}
    if oc.is_canonical:
        out["stabilizer"] = gstructure.stabilizer_tag(t).to_json()
    _json_only(cfg)
    _emit(cfg, to_json(out), stdout)


def run_fiber(cfg, stdout):
    doc = _tensor_doc(cfg)
    t = _tensor_from_doc(doc, cfg.input or "--data")
    tol = cfg.tol if cfg.tol is not None else gstructure.ADAPTED_TOL
    count = int(cfg.params.get("count") or doc.get("count", 5))
    if count < 1:
        raise ConfigError("--count must be at least 1")
    E0 = gstructure.normalize(t)
    tag = gstructure.stabilizer_tag(t)
    coframes = gstructure.adapted_fiber(E0, tag, count=count, seed=cfg.seed)
    residuals = [gstructure.adaptation_residual(E, t) for E in coframes]
    out = {
        "kind": doc["kind"],
        "stabilizer": tag.to_json(),
        "seed": cfg.seed,
        "coframes": [matrix_to_json(E.mat) for E in coframes],
        "residuals": residuals,
        "all_adapted": all(r <= tol for r in residuals),
    }
    _json_only(cfg)
    _emit(cfg, to_json(out), stdout)


# --------------------------------------------------------------------------
# bundles


def _gluing_from_doc(doc, charts, dim):
    """Build a chart cover's gluing data from its JSON description.

    ``{"name": "chart-constant", "matrices": {chart: M}}`` glues by
    ``g_ba = M_b M_a^{-1}``; ``{"name": "pairwise", "maps": [{"b", "a",
    "matrix"}]}`` lists constant ``g_ba`` directly (the reverse direction is
    the inverse); ``{"name": "identity"}`` glues trivially.
    """
    name = _need(doc, "name", "gluing")
    if name == "identity":
        return None, (lambda a, x: np.eye(dim))
    if name == "chart-constant":
        mats = {k: matrix_from_json(v) for k, v in _need(doc, "matrices", "gluing").items()}
        if set(mats) != set(charts):
            raise ConfigError("chart-constant gluing needs one matrix per chart")
        return None, (lambda a, x: mats[a])
    if name == "pairwise":
        table = {}
        for entry in _need(doc, "maps", "gluing"):
            b, a = _need(entry, "b", "gluing map"), _need(entry, "a", "gluing map")
            M = matrix_from_json(_need(entry, "matrix", "gluing map"))
            table[(b, a)] = M
            table.setdefault((a, b), np.linalg.inv(M))

        def gluing(b, a, x):
            if a == b:
                return np.eye(dim)
            try:
                return table[(b, a)]
            except KeyError:
                raise bundle.MissingOverlapData(f"no gluing map from {a!r} to {b!r}") from None

        return gluing, None
    raise ConfigError(f"unknown gluing {name!r}")


def _cover_from_doc(doc, where):
    charts = [bundle.Chart(_need(c, "name", where), _need(c, "samples", where))
              for c in _need(doc, "charts", where)]
    overlaps = [(_need(o, "a", where), _need(o, "b", where), _need(o, "samples", where))
                for o in doc.get("overlaps", [])]
    dim = int(doc.get("dim", 2))
    gluing, lam = _gluing_from_doc(_need(doc, "gluing", where), [c.name for c in charts], dim)
    if lam is not None:
        return bundle.ChartCover.from_chart_functions(charts, overlaps, lam, dim)
    return bundle.ChartCover(charts, overlaps, gluing, dim)


def _load_cover_and_section(cfg):
    """Cover plus optional section, from a built-in name or a JSON file."""
    _one_source(cfg)
    name = cfg.params.get("section")
    if cfg.builtin:
        cover = _generator_call(bundle.COVERS, cfg.builtin, {}, "cover")
        if name is None:
            return cover, None
        if name not in bundle.SECTIONS:
            raise ConfigError(f"unknown section {name!r}; choose from {sorted(bundle.SECTIONS)}")
        kind, fn = bundle.SECTIONS[name]
        return cover, bundle.LocalSection.from_global(cover, kind, fn)
    if name is not None:
        raise ConfigError("--section selects a built-in section; put file sections in the JSON")
    doc = _load_json(cfg.input)
    cover = _cover_from_doc(doc, cfg.input)
    sec = doc.get("section")
    if sec is None:
        return cover, None
    kind = _need(sec, "kind", "section")
    if kind not in KIND_NAMES:
        raise ConfigError(f"unknown section kind {kind!r}")
    return cover, bundle.LocalSection(cover, KIND_NAMES[kind], _need(sec, "values", "section"))


def run_bundle_check(cfg, stdout):
    cover, section = _load_cover_and_section(cfg)
    tol = cfg.tol if cfg.tol is not None else 1e-12
    out = {"cocycle": bundle.check_cocycle(cover, tol).to_json()}
    if section is not None:
        dev = section.compatibility_deviation()
        out["section"] = {"kind": KIND_LABELS[section.kind], "deviation": dev,
                          "compatible": dev <= bundle.COMPAT_TOL}
    _json_only(cfg)
    _emit(cfg, to_json(out), stdout)


def run_reduce(cfg, stdout):
    """Sample bundle points and compare the reduction predicate with adaptation.

    Half of the points are built adapted to the section value (a stabilizer
    translate of the normalized coframe), the other half carry random
    ``GL`` elements.
    """
    if cfg.builtin and cfg.params.get("section") is None:
        cfg.params["section"] = "metric"
    cover, section = _load_cover_and_section(cfg)
    if section is None:
        raise ConfigError("reduce needs a section")
    tol = cfg.tol if cfg.tol is not None else gstructure.ADAPTED_TOL
    count = int(cfg.params.get("count") or 100)
    f = bundle.section_to_equivariant(section)
    first = next(section.samples())[2]
    y0 = gstructure.canonical_tensor(section.kind, first.dim,
                                     first.rank if section.kind is TensorKind.SUBSPACE else None)
    pred = bundle.reduce_by_orbit(f, y0, tol=tol)
    tag = gstructure.stabilizer_tag(y0)
    gl = GroupTag("GL", cover.dim)

    rng = np.random.default_rng(cfg.seed)
    pts = list(cover.points())
    rows = []
    agree = 0
    for i in range(count):
        name, x = pts[rng.integers(len(pts))]
        y = section.value(name, x)
        if i % 2 == 0:
            A = random_group_element(tag, rng=rng)
            E = gstructure.adapted_fiber(gstructure.normalize(y), tag, elements=[A])[0]
            g = np.linalg.inv(E.mat)
        else:
            g = random_group_element(gl, rng=rng)
        p = bundle.BundlePoint(name, x, g)
        member = bool(pred(p))
        adapted = gstructure.is_adapted(p.coframe(), y, tol)
        agree += member == adapted
        rows.append({"chart": name, "x": x, "g": matrix_to_json(g),
                     "in_reduction": member, "adapted": adapted})
    out = {
        "y0": y0.data,
        "kind": KIND_LABELS[section.kind],
        "stabilizer": tag.to_json(),
        "seed": cfg.seed,
        "tol": tol,
        "agreement": agree / count,
        "points": rows,
    }
    _json_only(cfg)
    _emit(cfg, to_json(out), stdout)


def _json_only(cfg):
    if cfg.format not in (None, "json"):
        raise ConfigError(f"{cfg.command} only writes JSON")
    if cfg.plot:
        raise ConfigError(f"{cfg.command} has nothing to plot")


RUNNERS = {
    "curve": run_curve,
    "surface": run_surface,
    "normalize": run_normalize,
    "orbit": run_orbit,
    "fiber": run_fiber,
    "bundle-check": run_bundle_check,
    "reduce": run_reduce,
}


def run(cfg, stdout=None):
    """Execute ``cfg``; returns the process exit status."""
    stdout = sys.stdout if stdout is None else stdout
    RUNNERS[cfg.command](cfg, stdout)
    return 0


# --------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _bool(text):
    low = text.lower()
    if low in ("1", "true", "yes"):
        return True
    if low in ("0", "false", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--input", help="JSON input file")
    common.add_argument("--output", help="output path (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"))
    common.add_argument("--plot", help="SVG output path")
    common.add_argument("--tol", type=float, help="tolerance (default per command)")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--include-boundary", action="store_true",
                        help="keep nodes whose stencils reach a grid edge")

    parser = _Parser(prog="cartan-frames", description="Moving-frame invariants of curves, "
                     "surfaces and G-structures.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("curve", parents=[common], help="curvature and torsion of a curve")
    p.add_argument("--builtin", choices=sorted(curves.BUILTINS))
    for name in ("r", "a", "b", "length", "turns"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--clockwise", type=_bool)
    p.add_argument("--closed", type=_bool)

    p = sub.add_parser("surface", parents=[common], help="Gaussian and mean curvature")
    p.add_argument("--builtin", choices=sorted(surfaces.BUILTINS))
    for name in ("r", "a", "b", "c", "R", "size", "height", "vmax"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--n2", type=int)
    p.add_argument("--chart", choices=("angles", "stereographic"))
    p.add_argument("--function", dest="name", choices=sorted(surfaces.GRAPH_FUNCTIONS))
    p.add_argument("--dump", action="store_true", help="add Christoffel and h_ij columns")

    for cmd, text in (("normalize", "adapted coframe of a structure tensor"),
                      ("orbit", "orbit label of a structure tensor"),
                      ("fiber", "sample the adapted coframes of a structure tensor")):
        p = sub.add_parser(cmd, parents=[common], help=text)
        p.add_argument("--kind", choices=sorted(KIND_NAMES))
        p.add_argument("--data", help="tensor as JSON (matrix, basis columns or vector)")
        if cmd == "fiber":
            p.add_argument("--count", type=int)

    for cmd, text in (("bundle-check", "cocycle and section compatibility checks"),
                      ("reduce", "reduction of a bundle by a section")):
        p = sub.add_parser(cmd, parents=[common], help=text)
        p.add_argument("--builtin", choices=sorted(bundle.COVERS))
        p.add_argument("--section", choices=sorted(bundle.SECTIONS))
        if cmd == "reduce":
            p.add_argument("--count", type=int)
    return parser


_PARAM_KEYS = {
    "curve": CURVE_PARAMS,
    "surface": SURFACE_PARAMS + ("dump",),
    "normalize": ("kind", "data"),
    "orbit": ("kind", "data"),
    "fiber": ("kind", "data", "count"),
    "bundle-check": ("section",),
    "reduce": ("section", "count"),
}


def config_from_args(argv):
    ns = build_parser().parse_args(argv)
    params = {k: getattr(ns, k) for k in _PARAM_KEYS[ns.command] if getattr(ns, k, None) is not None}
    if ns.command == "surface" and not params.get("dump"):
        params.pop("dump", None)
    return RunConfig(
        command=ns.command,
        builtin=getattr(ns, "builtin", None),
        input=ns.input,
        output=ns.output,
        format=ns.format,
        plot=ns.plot,
        tol=ns.tol,
        seed=ns.seed,
        include_boundary=ns.include_boundary,
        params=params,
    )


def _thread_limit():
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return None
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def _report(exc, stderr):
    code = exc.code if isinstance(exc, CartanFramesError) else "InvalidInput"
    stderr.write(json.dumps({"error": code, "detail": str(exc)}) + "\n")


def main(argv=None, stdout=None, stderr=None):
    stderr = sys.stderr if stderr is None else stderr
    try:
        cfg = config_from_args(argv)
        limit = _thread_limit()
        if limit is None:
            return run(cfg, stdout)
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=limit):
            return run(cfg, stdout)
    except InputError as exc:
        _report(exc, stderr)
        return 2
    except ComputeError as exc:
        _report(exc, stderr)
        return 3
    except BrokenPipeError:
        # downstream reader closed early (e.g. piped into head)
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        return 1
    except (ValueError, KeyError, TypeError) as exc:
        # malformed values that slipped past the typed checks
        _report(exc, stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
