"""Verification jobs addressable by ``(module, operation)``.

Each job takes merged parameters, tolerances and a seed, and returns a
report with a list of checks, scalar metrics and named series (tables that
the command-line runner writes as CSV).  A job passes iff all its checks
pass.  Defaults reproduce the documented desk-scale acceptance settings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import em_space as em
from . import fock
from . import geometry as geo
from . import propagator as prop
from . import scalar_space as sc
from . import spectral as sp
from .cauchy import CauchyDatum
from .spectral import LatticeGrid


class Report:
    """Accumulates checks, metrics and series for one job."""

    def __init__(self):
        self.checks: list[dict] = []
        self.metrics: dict = {}
        self.series: dict = {}

    def check(self, name: str, value, limit, relation: str = "<") -> bool:
        ops = {
            "<": lambda v, l: v < l,
            "<=": lambda v, l: v <= l,
            ">": lambda v, l: v > l,
            "==": lambda v, l: v == l,
        }
        ok = bool(ops[relation](value, limit))
        self.checks.append({"name": name, "value": value, "limit": limit, "relation": relation, "passed": ok})
        return ok

    def table(self, name: str, columns: list[str], rows: list[list]) -> None:
        self.series[name] = {"columns": list(columns), "rows": [list(r) for r in rows]}

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)


@dataclass(frozen=True)
class JobSpec:
    module: str
    operation: str
    fn: Callable
    defaults: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    schedule_key: str | None = None
    summary: str = ""


REGISTRY: dict[tuple[str, str], JobSpec] = {}


def job(module, operation, defaults=None, tolerances=None, schedule_key=None):
    def deco(fn):
        REGISTRY[(module, operation)] = JobSpec(
            module,
            operation,
            fn,
            dict(defaults or {}),
            dict(tolerances or {}),
            schedule_key,
            (fn.__doc__ or "").strip().splitlines()[0],
        )
        return fn

    return deco


def _to_builtin(x):
    if isinstance(x, dict):
        return {str(k): _to_builtin(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_to_builtin(v) for v in x]
    if isinstance(x, np.ndarray):
        return _to_builtin(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def run_job(module: str, operation: str, parameters=None, tolerances=None, schedule=None, seed=0) -> dict:
    """Run one registered job and return its JSON-ready report."""
    spec = REGISTRY[(module, operation)]
    params = {**spec.defaults, **(parameters or {})}
    if schedule is not None:
        if spec.schedule_key is None:
            raise ValueError(f"{module}.{operation} takes no refinement schedule")
        params[spec.schedule_key] = list(schedule)
    tol = {**spec.tolerances, **(tolerances or {})}
    unknown = set(tol) - set(spec.tolerances)
    if unknown:
        raise ValueError(f"unknown tolerances for {module}.{operation}: {sorted(unknown)}")
    rep = Report()
    spec.fn(rep, params, tol, np.random.default_rng(seed))
    return _to_builtin(
        {
            "module": module,
            "operation": operation,
            "parameters": params,
            "tolerances": tol,
            "seed": seed,
            "passed": rep.passed,
            "checks": rep.checks,
            "metrics": rep.metrics,
            "series": rep.series,
        }
    )


# ---------------------------------------------------------------------------
# propagator


@job(
    "propagator",
    "identities",
    {"d_values": [1, 2, 3], "m_values": [0.0, 1.0], "N": 64, "a": 1.0},
    {"identity": 1e-10},
)
def _identities(rep, p, tol, rng):
    """Delta(0) vanishes and its time derivative is the lattice delta."""
    rows = []
    for d in p["d_values"]:
        for m in p["m_values"]:
            grid = LatticeGrid(d, p["N"], p["a"], m)
            k = prop.PropagatorKernel(grid)
            e0 = float(np.max(np.abs(k.slice(0.0))))
            e1 = float(np.max(np.abs(k.dt_slice(0.0) - grid.delta())))
            rows.append([d, m, e0, e1])
            rep.check(f"Delta(0)=0 d={d} m={m}", e0, tol["identity"])
            rep.check(f"dtDelta(0)=delta d={d} m={m}", e1, tol["identity"])
    rep.table("identities", ["d", "m", "delta_zero_err", "dt_delta_err"], rows)


@job(
    "propagator",
    "huygens",
    {"d": 3, "m": 0.0, "N_values": [64, 128], "a": 1.0, "t_fraction": 0.25, "control_m": 1.0, "window": "raised-cosine"},
    {"ratio": 0.05, "control_min": 0.2},
    schedule_key="N_values",
)
def _huygens(rep, p, tol, rng):
    """Interior suppression inside the light cone for the massless field."""
    rows, ratios = [], []
    for N in p["N_values"]:
        grid = LatticeGrid(p["d"], N, p["a"], p["m"])
        r = prop.huygens_check(prop.PropagatorKernel(grid), p["t_fraction"] * grid.L, window=p["window"])
        ratios.append(r["ratio"])
        rows.append([N, r["ratio"], r["raw_ratio"], r["interior_max"], r["peak"]])
    rep.table("huygens", ["N", "ratio", "raw_ratio", "interior_max", "peak"], rows)
    rep.check(f"ratio N={p['N_values'][0]}", ratios[0], tol["ratio"])
    for N, a, b in zip(p["N_values"][1:], ratios, ratios[1:]):
        rep.check(f"ratio shrinks at N={N}", b, a)
    grid = LatticeGrid(p["d"], p["N_values"][0], p["a"], p["control_m"])
    ctrl = prop.huygens_check(prop.PropagatorKernel(grid), p["t_fraction"] * grid.L, window=p["window"])
    rep.metrics["control"] = ctrl
    rep.check("massive control ratio", ctrl["ratio"], tol["control_min"], ">")


@job(
    "propagator",
    "retarded_support",
    {"d": 2, "m": 0.0, "L": 128.0, "N_values": [64, 128], "source_radius": 6.0, "shell": 4.0},
    {"fraction": 1e-3, "control_min": 0.2},
    schedule_key="N_values",
)
def _retarded(rep, p, tol, rng):
    """Retarded field outside the causal shadow, with the advanced control."""
    rows, fr = [], []
    for N in p["N_values"]:
        grid = LatticeGrid(p["d"], N, p["L"] / N, p["m"])
        src = prop.SpacetimeSource(grid, (0.0,), (sp.bump(grid.radius / p["source_radius"]),))
        k = prop.PropagatorKernel(grid)
        ret = prop.retarded_support_check(src, k, shell=p["shell"], kind="retarded")
        adv = prop.retarded_support_check(src, k, shell=p["shell"], kind="advanced")
        rows.append([N, ret["t"], ret["fraction"], adv["fraction"]])
        fr.append(ret["fraction"])
        rep.check(f"advanced control fraction N={N}", adv["fraction"], tol["control_min"], ">")
    rep.table("retarded_support", ["N", "t", "retarded_fraction", "advanced_fraction"], rows)
    rep.check(f"retarded fraction N={p['N_values'][-1]}", fr[-1], tol["fraction"])
    for N, a, b in zip(p["N_values"][1:], fr, fr[1:]):
        rep.check(f"fraction decreases at N={N}", b, a)


# ---------------------------------------------------------------------------
# scalar space


def _square(grid: LatticeGrid, h: float) -> np.ndarray:
    return np.all([np.abs(x) <= h for x in grid.coords], axis=0)


@job(
    "scalar_space",
    "duality",
    {"d": 2, "N_values": [16, 32], "m_values": [0.0, 1.0], "a": 1.0, "square_fraction": 0.25, "ball_fraction": 0.6},
    {"gap": 1e-8},
    schedule_key="N_values",
)
def _scalar_duality(rep, p, tol, rng):
    """Relative duality for a ball inside a square ambient mask."""
    rows = []
    for N in p["N_values"]:
        for m in p["m_values"]:
            grid = LatticeGrid(p["d"], N, p["a"], m)
            h = p["square_fraction"] * grid.L
            M = _square(grid, h)
            B = (grid.radius < p["ball_fraction"] * h) & M
            r = sc.duality_check(B, M, grid)
            rows.append([N, m, r["gap_forward"], r["gap_dual"], r["radical_dim"], r["dim_ambient"], r["dim_B"], r["dim_Bprime"]])
            rep.check(f"gap_forward N={N} m={m}", r["gap_forward"], tol["gap"])
            rep.check(f"gap_dual N={N} m={m}", r["gap_dual"], tol["gap"])
            rep.check(f"finite-dimensional note N={N} m={m}", bool(r.get("note")), True, "==")
            rep.metrics["note"] = r["note"]
    rep.table("duality", ["N", "m", "gap_forward", "gap_dual", "radical_dim", "dim_M", "dim_B", "dim_Bprime"], rows)


@job(
    "scalar_space",
    "outer_regularity",
    {"d": 2, "N": 16, "m": 1.0, "a": 1.0, "ball_radius": 3.0, "rings": [4, 3, 2, 1]},
    {"floor": 1e-8},
    schedule_key="rings",
)
def _outer(rep, p, tol, rng):
    """Gap series over shrinking ring inflations of a ball."""
    grid = LatticeGrid(p["d"], p["N"], p["a"], p["m"])
    B = grid.radius < p["ball_radius"]
    r = sc.outer_regularity_scan(B, [sp.ring_inflate(B, k) for k in p["rings"]], grid)
    rep.table(
        "outer_regularity",
        ["rings", "gap_to_B", "gap_to_closure", "excess_dim"],
        list(zip(p["rings"], r["gap_to_B"], r["gap_to_closure"], r["excess_dim"])),
    )
    rep.metrics["closure_excess_dim"] = r["closure_excess_dim"]
    rep.check("series non-increasing", r["non_increasing"], True, "==")
    rep.check("one-ring floor gap", r["gap_to_closure"][-1], tol["floor"])


@job(
    "scalar_space",
    "mollifier",
    {"d": 2, "N": 128, "a": 1 / 64, "m": 1.0, "schedule": [4, 8, 16], "radius0": 0.4, "radius1": 0.3},
    {},
    schedule_key="schedule",
)
def _mollifier(rep, p, tol, rng):
    """Mollified data converge in energy norm with controlled support."""
    grid = LatticeGrid(p["d"], p["N"], p["a"], p["m"])
    r = grid.radius
    h = CauchyDatum(grid, sp.bump(r / p["radius0"]), grid.coords[0] * sp.bump(r / p["radius1"]))
    out = sc.mollifier_convergence(sc.psi_inverse(h), p["schedule"])
    rep.table("mollifier", ["n", "energy_error", "support_inclusion"], list(zip(out["schedule"], out["errors"], out["support_inclusion"])))
    rep.check("support inclusion for every n", all(out["support_inclusion"]), True, "==")
    rep.check("errors strictly decreasing", out["decreasing"], True, "==")


@job(
    "scalar_space",
    "forward_cone_density",
    {"d": 2, "N": 32, "a": 1.0, "m_values": [0.05, 1.0], "sizes": [8, 16, 32], "targets": 5},
    {},
    schedule_key="sizes",
)
def _forward_cone(rep, p, tol, rng):
    """Projection residuals of random targets onto propagated forward-cone sources."""
    rows = []
    for m in p["m_values"]:
        grid = LatticeGrid(p["d"], p["N"], p["a"], m)
        kernel = prop.PropagatorKernel(grid)
        family = sc.forward_cone_sources(grid, max(p["sizes"]), rng)
        targets = []
        for _ in range(p["targets"]):
            c = rng.uniform(-grid.L / 4, grid.L / 4, size=grid.d)
            dist = np.sqrt(sum((x - ci) ** 2 for x, ci in zip(grid.coords, c)))
            w = rng.uniform(2.0, 4.0) * grid.a
            amp = rng.normal(size=2)
            targets.append(CauchyDatum(grid, amp[0] * sp.bump(dist / w), amp[1] * sp.bump(dist / w)))
        out = sc.forward_cone_density_residual(targets, family, kernel, p["sizes"])
        for j, series in enumerate(out["residuals"]):
            for k, res in zip(out["sizes"], series):
                rows.append([m, m * grid.a, j, k, res])
        rep.check(f"non-increasing residuals m={m}", out["non_increasing"], True, "==")
    rep.table("forward_cone", ["m", "m_a", "target", "size", "residual"], rows)
    rep.metrics["note"] = "trend only; no continuum threshold is asserted"


# ---------------------------------------------------------------------------
# spectral


@job(
    "spectral",
    "diffeo_bounds",
    {
        "d": 2,
        "N": 64,
        "L": 16.0,
        "center": [0.0, 0.0],
        "r_in": 2.0,
        "r_out": 4.0,
        "width": 0.5,
        "b_values": [0.05, 0.1, 0.2],
        "dilation_N": 128,
        "dilation_L": 16.0,
        "dilation_lam": 0.9,
        "strong_lams": [0.9, 0.95, 0.99],
        "bump_radius": 1.5,
    },
    {"bound_slack": 1.05, "dilation": 1e-3},
    schedule_key="b_values",
)
def _diffeo(rep, p, tol, rng):
    """Diffeomorphism pullback bounds, dilation unitarity and strong convergence."""
    grid = LatticeGrid(p["d"], p["N"], p["L"] / p["N"], 0.0)
    rows = []
    for b in p["b_values"]:
        spec = sp.DiffeoSpec.with_b(b, tuple(p["center"]), p["r_in"], p["r_out"], p["width"])
        for sign in (1, -1):
            est = sp.diffeo_operator_norm(grid, spec, sign)
            bound = sp.diffeo_bound(b, p["d"], sign)
            rows.append([b, sign, est.value**2, bound, est.converged])
            rep.check(f"norm^2 <= bound b={b} sign={sign:+d}", est.value**2, bound * tol["bound_slack"], "<=")
    rep.table("diffeo", ["b", "sign", "norm_squared", "bound", "converged"], rows)

    g = LatticeGrid(p["d"], p["dilation_N"], p["dilation_L"] / p["dilation_N"], 0.0)
    r = g.radius
    f = (sp.bump(r / p["bump_radius"]), g.coords[0] * sp.bump(r / p["bump_radius"]))

    def norm(pair):
        return math.hypot(sp.norm_pm(g, pair[0], 1), sp.norm_pm(g, pair[1], -1))

    nf = norm(f)
    D = sp.dilation(g, f, p["dilation_lam"])
    rel = abs(norm(D) - nf) / nf
    rep.metrics["dilation_norm_error"] = rel
    rep.check(f"dilation norm preserved lam={p['dilation_lam']}", rel, tol["dilation"])
    strong = []
    for lam in p["strong_lams"]:
        D = sp.dilation(g, f, lam)
        strong.append([lam, norm((D[0] - f[0], D[1] - f[1])) / nf])
    rep.table("strong_convergence", ["lam", "relative_distance"], strong)
    dist = [s[1] for s in strong]
    rep.check("strong convergence decreasing", all(b < a for a, b in zip(dist, dist[1:])), True, "==")


@job(
    "spectral",
    "fractional_identity",
    {"s": 0.5, "d": 2, "L": 1.0, "N_values": [128, 256], "bump_fraction": 0.125, "images": 3},
    {"constant": 1e-4, "ratio_band": 0.1},
    schedule_key="N_values",
)
def _fractional(rep, p, tol, rng):
    """Quadrature constant and double-sum versus Fourier seminorm."""
    A1 = sp.fractional_constant(1, p["s"])
    rep.metrics["A_d1"] = A1
    if p["s"] == 0.5:
        rep.check("A_1/2 (d=1) equals 2 pi", abs(A1 - 2 * np.pi), tol["constant"])
    rows, dev = [], []
    for N in p["N_values"]:
        grid = LatticeGrid(p["d"], N, p["L"] / N, 0.0)
        f = sp.bump(grid.radius / (p["bump_fraction"] * p["L"]))
        lhs, rhs, A = sp.fractional_identity(grid, f, p["s"], images=p["images"])
        rows.append([N, lhs, rhs, lhs / rhs])
        dev.append(abs(lhs / rhs - 1))
    rep.table("fractional", ["N", "lhs", "rhs", "ratio"], rows)
    rep.check(f"ratio within band N={p['N_values'][0]}", dev[0], tol["ratio_band"], "<=")
    for N, a, b in zip(p["N_values"][1:], dev, dev[1:]):
        rep.check(f"ratio closer to 1 at N={N}", b, a)


@job(
    "spectral",
    "mult_operator",
    {"d": 2, "L": 16.0, "N_values": [32, 64, 128], "chi_radius": 3.0},
    {"stability": 0.10, "hs_convergence": 0.05},
    schedule_key="N_values",
)
def _mult(rep, p, tol, rng):
    """Weighted multiplication operator norms, Schur bound and infrared HS norm."""
    rows, norms, hs = [], {1: [], -1: []}, {1: [], -1: []}
    for N in p["N_values"]:
        grid = LatticeGrid(p["d"], N, p["L"] / N, 0.0)
        chi = np.e * sp.bump(grid.radius / p["chi_radius"])
        for sign in (1, -1):
            est = sp.mult_operator_norm_estimate(grid, chi, sign)
            ir = sp.infrared_hs_norm(grid, chi, sign)
            sch = sp.schur_bound_check(grid, chi, sign)
            norms[sign].append(est.value)
            hs[sign].append(ir)
            rows.append([N, sign, est.value, est.converged, ir, sch["bound"], sch["block_norm"], sch["dominates"]])
            rep.check(f"Schur bound dominates N={N} sign={sign:+d}", sch["dominates"], True, "==")
    rep.table("mult_operator", ["N", "sign", "norm", "converged", "ir_hs", "schur_bound", "uv_block_norm", "dominates"], rows)
    for sign in (1, -1):
        v = norms[sign]
        rep.check(f"norm stable across N sign={sign:+d}", max(v) / min(v) - 1, tol["stability"], "<=")
        h = hs[sign]
        rep.check(f"infrared HS converges on last doubling sign={sign:+d}", abs(h[-1] / h[-2] - 1), tol["hs_convergence"], "<=")


# ---------------------------------------------------------------------------
# em space


def _random_em(grid: LatticeGrid, rng) -> em.EMDatum:
    shape = (grid.d,) + grid.shape
    a = np.stack([sp.apply_multiplier(x, np.exp(-((grid.pabs * grid.a) ** 2)), grid.d) for x in rng.normal(size=shape)])
    nf = em.curl(grid, a).shape[0]
    psi = rng.normal(size=(nf,) + grid.shape)
    return em.EMDatum(grid, a, em.curl_adjoint(grid, psi))


@job(
    "em_space",
    "structure_and_duality",
    {"structure_N": 8, "cases": [[2, 16], [2, 32], [3, 16], [3, 32]], "a": 1.0, "ball_fraction": 0.6, "d3_half_widths": {"16": 2, "32": 3}},
    {"structure": 1e-10, "gap": 1e-6},
)
def _em(rep, p, tol, rng):
    """Gauge invariance, two-form norm agreement and EM relative duality."""
    srows = []
    for d in (2, 3):
        grid = LatticeGrid(d, p["structure_N"], p["a"])
        u, v = _random_em(grid, rng), _random_em(grid, rng)
        phi, chi = rng.normal(size=grid.shape), rng.normal(size=grid.shape)
        us, vs = u.gauge_shift(phi), v.gauge_shift(chi)
        scale = em.em_norm(u) * em.em_norm(v)
        d_inner = abs(em.em_inner(us, vs) - em.em_inner(u, v)) / scale
        d_sympl = abs(em.em_symplectic(us, vs) - em.em_symplectic(u, v)) / scale
        same_supp = bool(np.array_equal(em.gauge_class_support(us), em.gauge_class_support(u)))
        t, mg = em.em_inner_forms(u, u)
        d_forms = abs(t - mg) / abs(t)
        srows.append([d, d_inner, d_sympl, same_supp, d_forms])
        rep.check(f"gauge-invariant inner product d={d}", d_inner, tol["structure"])
        rep.check(f"gauge-invariant symplectic form d={d}", d_sympl, tol["structure"])
        rep.check(f"gauge-invariant support d={d}", same_supp, True, "==")
        rep.check(f"two-form norm agreement d={d}", d_forms, tol["structure"])
    rep.table("em_structure", ["d", "inner_shift", "sympl_shift", "support_equal", "norm_forms"], srows)
    rows = []
    for d, N in p["cases"]:
        grid = LatticeGrid(d, N, p["a"])
        if d == 2:
            h = N * p["a"] / 4
            B = grid.radius < p["ball_fraction"] * h
        else:
            h = p["d3_half_widths"].get(str(N), N // 8) * p["a"]
            B = grid.radius < 0.9 * h
        M = _square(grid, h)
        r = em.em_duality_check(B & M, M, grid)
        rows.append([d, N, r["gap_forward"], r["gap_dual"], r["radical_dim"], r["dim_ambient"], r["leakage_sites"]])
        rep.check(f"EM gap_forward d={d} N={N}", r["gap_forward"], tol["gap"])
        rep.check(f"EM gap_dual d={d} N={N}", r["gap_dual"], tol["gap"])
    rep.table("em_duality", ["d", "N", "gap_forward", "gap_dual", "radical_dim", "dim_M", "leakage_sites"], rows)


@job(
    "em_space",
    "boost_region",
    {"N": 32, "a": 1.0, "c": 1 / 16, "eps_values": [0.1, 0.5, 0.9], "directions": [[1.0, 0.0], [0.7071067811865476, 0.7071067811865476]]},
    {"gap": 1e-6, "remainder": 1e-6},
    schedule_key="eps_values",
)
def _boost(rep, p, tol, rng):
    """EM duality on conformal images of boost caps, with the boundary split."""
    grid = LatticeGrid(2, p["N"], p["a"])
    rows = []
    for eps in p["eps_values"]:
        for v in p["directions"]:
            seed = int(rng.integers(2**31))
            r = em.boost_region_duality(p["c"], v, eps, grid, seed=seed)
            bs = r["boundary_split"]
            tag = f"eps={eps} v=({v[0]:.3g},{v[1]:.3g})"
            rows.append([eps, v[0], v[1], r["mask_sizes"]["B"], r["mask_sizes"]["M"], r["gap_forward"], r["gap_dual"], bs["remainder_fraction"], bs["inside_within_B_plus_ring"]])
            rep.check(f"mask built {tag}", r["mask_sizes"]["B"], 0, ">")
            rep.check(f"gap_forward {tag}", r["gap_forward"], tol["gap"])
            rep.check(f"gap_dual {tag}", r["gap_dual"], tol["gap"])
            rep.check(f"split remainder {tag}", bs["remainder_fraction"], tol["remainder"])
    rep.table("boost_region", ["eps", "v0", "v1", "B_sites", "M_sites", "gap_forward", "gap_dual", "remainder_fraction", "inside_within_B_plus_ring"], rows)


# ---------------------------------------------------------------------------
# fock


def _cvec(x) -> np.ndarray:
    return np.array([complex(re, im) for re, im in x])


@job(
    "fock",
    "ccr",
    {
        "n_modes": 2,
        "f": [[0.4, 0.3], [-0.2, 0.5]],
        "g": [[0.1, -0.6], [0.5, 0.2]],
        "vacuum_cutoff": 12,
        "cutoffs": [8, 12, 16],
        "commutation_cutoff": 12,
        "commutant_cutoffs": [6, 8, 10],
        "commutant_v": [[1.0, 0.0]],
    },
    {"vacuum": 1e-6, "commutation": 1e-5},
    schedule_key="cutoffs",
)
def _ccr(rep, p, tol, rng):
    """Weyl relations, vacuum expectations and the one-mode commutant count."""
    n = p["n_modes"]
    f, g = _cvec(p["f"]), _cvec(p["g"])
    ctx = fock.FockContext(n, p["vacuum_cutoff"])
    vac = abs(fock.vacuum_expectation(ctx, fock.weyl(ctx, f)) - np.exp(-np.vdot(f, f).real / 2))
    rep.metrics["vacuum_error"] = vac
    rep.check(f"vacuum Weyl expectation K={ctx.cutoff}", vac, tol["vacuum"])
    res = [fock.weyl_relation_residual(fock.FockContext(n, K), f, g) for K in p["cutoffs"]]
    rep.table("weyl_relation", ["K", "residual"], list(zip(p["cutoffs"], res)))
    rep.check("Weyl residual decreasing in K", all(b < a for a, b in zip(res, res[1:])), True, "==")
    comm = fock.commutation_vs_symplectic(fock.FockContext(n, p["commutation_cutoff"]), f, g)
    rep.metrics["commutation"] = comm
    rep.check("commutator norm matches 2|sin sigma|", comm["analytic_difference"], tol["commutation"])
    rep.check("commutator norm matches phase-times-product norm", comm["norm_difference"], tol["commutation"])
    mis = [fock.commutation_vs_symplectic(fock.FockContext(n, K), f, g)["mismatch"] for K in p["cutoffs"]]
    rep.table("commutation_mismatch", ["K", "operator_mismatch"], list(zip(p["cutoffs"], mis)))
    rows = []
    V = fock.RealSubspace([_cvec(p["commutant_v"])])
    H = fock.RealSubspace([np.array([1.0]), np.array([1j])])
    for K in p["commutant_cutoffs"]:
        r = fock.relative_commutant_dims(fock.FockContext(1, K), V, H)
        rows.append([K, r["commutant_dim"], r["complement_dim"], r["difference"], r["constraint_condition"]])
        rep.check(f"one-mode commutant dims agree K={K}", r["difference"], 0, "==")
    rep.table("relative_commutant", ["K", "commutant_dim", "complement_dim", "difference", "condition"], rows)


# ---------------------------------------------------------------------------
# geometry


@job(
    "geometry",
    "predicates",
    {"probes": 10000, "T": 1.0, "d": 2, "ball_inner": 1.0, "ball_outer": 2.0, "cap_v": [1.0, 0.0], "cap_eps": 0.5},
    {"exact": 1e-12},
)
def _geometry(rep, p, tol, rng):
    """Relative-complement predicates, ray inversion and conformal images."""
    d, n = p["d"], p["probes"]
    zero = (0.0,) * d
    R = geo.DiamondOverBase(geo.FlatTimeSlice(0.0), geo.Ball(zero, p["ball_inner"]))
    M = geo.DiamondOverBase(geo.FlatTimeSlice(0.0), geo.Ball(zero, p["ball_outer"]))
    P = rng.uniform(-1.1 * p["ball_outer"], 1.1 * p["ball_outer"], (n, d + 1))
    a = geo.causal_complement(R, M).contains(P)
    b = geo.relative_complement_predicate(R, M, P)
    rep.check("double-cone complement predicates agree", int((a != b).sum()), 0, "==")
    rep.metrics["ball_probes_inside"] = int(a.sum())

    Rc = geo.BoostRegionCompletion(1.0, tuple(p["cap_v"]), p["cap_eps"])
    V = geo.ForwardCone((0.0,) * (d + 1))
    P = np.column_stack([rng.uniform(0, 4, n), rng.uniform(-4, 4, (n, d))])
    a = geo.causal_complement(Rc, V).contains(P)
    b = geo.relative_complement_predicate(Rc, V, P)
    rep.check("boost-cap complement predicates agree", int((a != b).sum()), 0, "==")
    rep.metrics["cap_probes_inside"] = int(a.sum())

    X = rng.uniform(-2, 2, (n, d + 1))
    X = X[np.abs(geo.minkowski_square(X)) > 0.1]
    inv = float(np.max(np.abs(geo.ray_inversion(geo.ray_inversion(X)) - X)))
    rep.check("ray inversion is an involution", inv, tol["exact"])

    T = p["T"]
    phi = geo.conformal_map(T)
    apex = phi(np.zeros(d + 1))
    target = np.zeros(d + 1)
    target[0] = -T
    rep.check("apex maps to the lower vertex", float(np.max(np.abs(apex - target))), tol["exact"])
    eta = rng.uniform(0, 3, n)
    u = rng.normal(size=(n, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    H = phi.c * np.column_stack([np.cosh(eta), np.sinh(eta)[:, None] * u])
    img = phi(H)
    t_err = float(np.max(np.abs(img[:, 0] + T / 2)))
    r_excess = float(max(0.0, np.max(np.linalg.norm(img[:, 1:], axis=1)) - T / 2))
    rep.check("hyperboloid maps to the flat slice t=-T/2", t_err, tol["exact"])
    rep.check("hyperboloid image inside the basis ball", r_excess, tol["exact"], "<=")
    back = float(np.max(np.abs(phi.inverse(img) - H)))
    rep.check("conformal map round trip", back, tol["exact"] * 10)
