"""Pseudospectral solver for the coupled mild-solution integral system

    u_i(t, x) = (G_i(t, 0) phi_i)(x)
                + int_0^t (G_i(t, s) [s^(sigma_i) u_j(s)^(beta_i)])(x) ds,

where G_i(t, s) is the Fourier multiplier exp(-(t^rho_i - s^rho_i)|xi|^alpha_i)
on a periodic truncation of R^d.  Time marching is a graded-mesh fixed-point
(Picard) iteration of the local integral form on each cell, with the singular
weight s^sigma absorbed into the quadrature weights so s = 0 is never sampled.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .exponents import SystemParams
from .kernels import KernelSpec, SpectralGrid, eval_density_grid, tail_mass_bound

log = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e12
# fields are clamped to zero above this magnitude of negative ringing
FIELD_CLAMP_FLOOR = 1e-12

INIT_KINDS = ("stable_kernel", "gaussian", "from_file")
DEALIAS_MODES = ("two_thirds", "none")

SNAPSHOT_MAGIC = b"FWCS"
SNAPSHOT_VERSION = 1


class StepRejected(RuntimeError):
    """Picard iteration failed to reach tolerance within the iteration cap."""

    def __init__(self, time, diff):
        super().__init__(f"step to t={time:.6g} stalled (last change {diff:.3e})")
        self.time = time
        self.diff = diff


class Divergence(RuntimeError):
    """Overflow or non-finite values; the trajectory is presumed to blow up."""

    def __init__(self, time):
        super().__init__(f"solution diverged near t={time:.6g}")
        self.time = time


class SnapshotFormatError(ValueError):
    pass


@dataclass(frozen=True)
class TimeMesh:
    """Graded mesh t_k = T (k/K)^gamma on [0, T]."""

    horizon: float
    steps: int
    grading: float = 1.0

    def __post_init__(self):
        if not self.horizon > 0.0:
            raise ValueError("horizon must be positive")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.grading < 1.0:
            raise ValueError("grading must be >= 1")

    def nodes(self) -> np.ndarray:
        k = np.arange(self.steps + 1, dtype=float)
        return self.horizon * (k / self.steps) ** self.grading


@dataclass(frozen=True)
class InitialData:
    kind: str
    epsilon: float = 1.0
    width: float = 1.0
    path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in INIT_KINDS:
            raise ValueError(f"unknown initial data kind {self.kind!r}")
        if self.kind == "from_file" and not self.path:
            raise ValueError("from_file initial data needs a path")


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams
    grid: SpectralGrid
    mesh: TimeMesh
    init: InitialData
    picard_tol: float = 1e-10
    picard_max_iter: int = 25
    dealias: str = "two_thirds"
    snapshot_stride: int = 10
    coupling_scale: float = 1.0    # debug switch: 0 turns the system linear

    def __post_init__(self):
        if not self.picard_tol > 0.0:
            raise ValueError("picard_tol must be positive")
        if self.picard_max_iter < 1:
            raise ValueError("picard_max_iter must be >= 1")
        if self.dealias not in DEALIAS_MODES:
            raise ValueError(f"unknown dealias mode {self.dealias!r}")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")
        if self.grid.dim != self.params.dim:
            raise ValueError("grid dimension does not match system dimension")
        if self.grid.dim == 3 and self.grid.n > 128:
            raise ValueError("dim 3 runs are limited to n <= 128 per axis")
        min_sigma = min(self.params.sigma)
        gamma_floor = max(1.0, 1.0 / (1.0 + min_sigma))
        if self.mesh.grading + 1e-12 < gamma_floor:
            raise ValueError(
                f"grading {self.mesh.grading} under-resolves the t^sigma weight; need >= {gamma_floor:.6g}")


@dataclass
class FieldPair:
    """Both solution components sampled on the grid at one time."""

    u1: np.ndarray
    u2: np.ndarray
    time: float

    def components(self):
        return (self.u1, self.u2)

    def copy(self) -> "FieldPair":
        return FieldPair(self.u1.copy(), self.u2.copy(), self.time)


@dataclass
class StepDiagnostics:
    iterations: int
    changes: list          # successive iterate distances
    clamped: int


@dataclass
class SolveStatus:
    kind: str              # "completed" | "diverged" | "step_rejected"
    time: float

    @property
    def completed(self) -> bool:
        return self.kind == "completed"


NORM_COLUMNS = ("t", "linf_u1", "linf_u2", "ls_u1", "ls_u2",
                "scaled_u1", "scaled_u2", "mass_u1", "mass_u2", "picard_iters")


@dataclass
class NormSeries:
    """Per-node norm history; ls/scaled columns are NaN when no integrability
    order is attached to the run."""

    t: np.ndarray
    linf: np.ndarray       # shape (nodes, 2)
    ls: np.ndarray         # shape (nodes, 2)
    scaled: np.ndarray     # shape (nodes, 2)
    mass: np.ndarray       # shape (nodes, 2)
    picard_iters: np.ndarray
    s_orders: Optional[tuple] = None
    xi: Optional[tuple] = None

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(",".join(NORM_COLUMNS) + "\n")
            for k in range(self.t.size):
                row = [_fmt(self.t[k])]
                for pair in (self.linf, self.ls, self.scaled, self.mass):
                    row += [_fmt(pair[k, 0]), _fmt(pair[k, 1])]
                row.append(str(int(self.picard_iters[k])))
                fh.write(",".join(row) + "\n")

    @staticmethod
    def read_csv(path) -> "NormSeries":
        rows = Path(path).read_text().strip().splitlines()
        header = rows[0].split(",")
        if tuple(header) != NORM_COLUMNS:
            raise SnapshotFormatError(f"unexpected norm CSV header in {path}")
        data = []
        for line in rows[1:]:
            parts = line.split(",")
            data.append([float(p) if p else math.nan for p in parts])
        arr = np.asarray(data, dtype=float)
        return NormSeries(t=arr[:, 0], linf=arr[:, 1:3], ls=arr[:, 3:5],
                          scaled=arr[:, 5:7], mass=arr[:, 7:9],
                          picard_iters=arr[:, 9].astype(int))


def _fmt(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return ""
    return f"{x:.17g}"


@dataclass
class SolveResult:
    snapshots: list        # FieldPair at every stride-th node (first and last always)
    norms: NormSeries
    status: SolveStatus
    diagnostics: dict = field(default_factory=dict)


def recommended_half_length(params: SystemParams, horizon: float, safety: float = 6.0) -> float:
    """Dispersive-spread heuristic max_i (T^rho_i)^(1/alpha_i) times a safety factor."""
    spread = max((horizon ** params.rho[i]) ** (1.0 / params.alpha[i]) for i in (0, 1))
    return safety * spread


def make_initial_data(init: InitialData, grid: SpectralGrid, params: SystemParams) -> FieldPair:
    """Nonnegative, integrable, bounded initial data at t = 0."""
    if init.kind == "stable_kernel":
        fields = [init.epsilon * eval_density_grid(KernelSpec(params.alpha[i], grid.dim), 1.0, grid)
                  for i in (0, 1)]
        return FieldPair(fields[0], fields[1], 0.0)
    if init.kind == "gaussian":
        r2 = grid.radius() ** 2
        w2 = init.width**2
        bump = init.epsilon * (2.0 * math.pi * w2) ** (-grid.dim / 2.0) * np.exp(-r2 / (2.0 * w2))
        return FieldPair(bump, bump.copy(), 0.0)
    pair, file_grid, _ = read_snapshot(init.path)
    if (file_grid.dim, file_grid.n) != (grid.dim, grid.n) \
            or abs(file_grid.half_length - grid.half_length) > 1e-12 * grid.half_length:
        raise SnapshotFormatError(
            f"snapshot grid (dim={file_grid.dim}, n={file_grid.n}, L={file_grid.half_length}) "
            f"does not match run grid (dim={grid.dim}, n={grid.n}, L={grid.half_length})")
    pair.time = 0.0
    return pair


def propagate_linear(values: np.ndarray, grid: SpectralGrid, alpha: float, rho: float,
                     t_from: float, t_to: float) -> np.ndarray:
    """Apply the two-time multiplier exp(-(t^rho - s^rho)|xi|^alpha).

    Mode zero is untouched, so Riemann mass is preserved exactly; s = t is
    the identity up to a transform round trip.
    """
    if t_from < 0.0 or t_to < t_from:
        raise ValueError(f"need 0 <= t_from <= t_to, got {t_from}, {t_to}")
    tau = t_to**rho - t_from**rho
    mult = np.exp(-tau * grid.symbol_exponent(alpha))
    return grid.inverse_rfft(mult * np.fft.rfftn(values))


def _dealias_mask(grid: SpectralGrid) -> np.ndarray:
    keep = grid.n // 3
    full = np.abs(np.fft.fftfreq(grid.n) * grid.n) <= keep
    half = np.abs(np.fft.rfftfreq(grid.n) * grid.n) <= keep
    axes = [full] * (grid.dim - 1) + [half]
    mesh = np.meshgrid(*axes, indexing="ij")
    out = mesh[0]
    for m in mesh[1:]:
        out = out & m
    return out


def nonlinear_term(pair: FieldPair, params: SystemParams, s: float,
                   grid: SpectralGrid, dealias: str = "two_thirds"):
    """The coupling fields (s^sigma_1 u_2^beta_1, s^sigma_2 u_1^beta_2).

    Powers are taken pointwise in real space (valid for non-integer beta on
    nonnegative fields) with an optional two-thirds spectral guard applied to
    the result.  Requires s > 0 whenever a sigma is negative.
    """
    if s <= 0.0 and min(params.sigma) < 0.0:
        raise ValueError("s must be positive when a sigma exponent is negative")
    out = []
    for i in (0, 1):
        u_other = pair.components()[1 - i]
        if float(u_other.min()) < -FIELD_CLAMP_FLOOR:
            raise RuntimeError("negative field values beyond the clamp floor; upstream invariant breach")
        powed = np.maximum(u_other, 0.0) ** params.beta[i]
        if dealias == "two_thirds":
            powed = grid.inverse_rfft(_dealias_mask(grid) * np.fft.rfftn(powed))
        out.append(s ** params.sigma[i] * powed)
    return tuple(out)


class _Plan:
    """Precomputed spectral data for one run."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.grid = config.grid
        self.symb = [config.grid.symbol_exponent(config.params.alpha[i]) for i in (0, 1)]
        self.mask = _dealias_mask(config.grid) if config.dealias == "two_thirds" else None
        # 2-point Gauss rule on the reference cell [-1, 1]
        self.gauss_x = np.array([-1.0, 1.0]) / math.sqrt(3.0)
        self.gauss_w = np.array([1.0, 1.0])

    def multiplier(self, i: int, tau: float) -> np.ndarray:
        return np.exp(-tau * self.symb[i])


def _clamp(values: np.ndarray):
    mn = float(values.min())
    if mn >= 0.0:
        return values, 0
    count = int(np.count_nonzero(values < 0.0))
    np.maximum(values, 0.0, out=values)
    return values, count


def step(pair: FieldPair, t_next: float, plan: _Plan):
    """Advance both components from pair.time to t_next by Picard iteration
    of the local integral form.

    The coupling integral uses 2-point Gauss quadrature in the graded
    variable tau = s^(1/gamma); the integrand value of the other component
    at interior quadrature times is interpolated linearly in tau between the
    cell endpoints.  Raises :class:`Divergence` on overflow and
    :class:`StepRejected` when the iteration does not settle.
    """
    cfg = plan.config
    params = cfg.params
    grid = plan.grid
    t_cur = pair.time
    if not t_next > t_cur:
        raise ValueError("t_next must exceed the current time")
    gamma = cfg.mesh.grading
    tau_a, tau_b = t_cur ** (1.0 / gamma), t_next ** (1.0 / gamma)
    half = 0.5 * (tau_b - tau_a)
    tau_q = 0.5 * (tau_a + tau_b) + half * plan.gauss_x
    s_q = tau_q**gamma
    theta_q = (tau_q - tau_a) / (tau_b - tau_a)
    jac_q = plan.gauss_w * half * gamma * tau_q ** (gamma - 1.0)

    hat_cur = [np.fft.rfftn(pair.u1), np.fft.rfftn(pair.u2)]
    base = []
    weights = []
    node_mult = []
    for i in (0, 1):
        rho_i = params.rho[i]
        g_full = plan.multiplier(i, t_next**rho_i - t_cur**rho_i)
        base.append(grid.inverse_rfft(g_full * hat_cur[i]))
        weights.append(jac_q * s_q ** params.sigma[i])
        node_mult.append([plan.multiplier(i, t_next**rho_i - s**rho_i) for s in s_q])

    cur = [pair.u1, pair.u2]
    v = [b.copy() for b in base]
    clamped = 0
    for i in (0, 1):
        v[i], c = _clamp(v[i])
        clamped += c

    changes = []
    iterations = 0
    for _ in range(cfg.picard_max_iter):
        iterations += 1
        new = []
        for i in (0, 1):
            j = 1 - i
            acc = base[i].copy()
            if cfg.coupling_scale != 0.0:
                for q in range(s_q.size):
                    interp = (1.0 - theta_q[q]) * cur[j] + theta_q[q] * v[j]
                    np.maximum(interp, 0.0, out=interp)
                    integrand = interp ** params.beta[i]
                    hat = np.fft.rfftn(integrand)
                    if plan.mask is not None:
                        hat *= plan.mask
                    acc += (cfg.coupling_scale * weights[i][q]) \
                        * grid.inverse_rfft(node_mult[i][q] * hat)
            acc, c = _clamp(acc)
            clamped += c
            new.append(acc)

        peak = max(float(new[0].max(initial=0.0)), float(new[1].max(initial=0.0)))
        if not (np.isfinite(new[0]).all() and np.isfinite(new[1]).all()) or peak > DIVERGENCE_LIMIT:
            raise Divergence(t_next)
        diff = 0.0
        for i in (0, 1):
            scale = float(np.abs(new[i]).max(initial=0.0))
            d = float(np.abs(new[i] - v[i]).max(initial=0.0))
            diff = max(diff, d / scale if scale > 0.0 else d)
        changes.append(diff)
        v = new
        if diff < cfg.picard_tol:
            break
    else:
        raise StepRejected(t_next, changes[-1])

    return FieldPair(v[0], v[1], t_next), StepDiagnostics(iterations, changes, clamped)


def _grid_norms(values: np.ndarray, grid: SpectralGrid, order: Optional[float]):
    linf = float(np.abs(values).max(initial=0.0))
    mass = float(values.sum() * grid.cell_volume)
    if order is None:
        return linf, math.nan, mass
    ls = float((np.abs(values) ** order).sum() * grid.cell_volume) ** (1.0 / order)
    return linf, ls, mass


def solve(config: RunConfig, exponents=None) -> SolveResult:
    """March the graded mesh, recording norms at every node and field
    snapshots every ``snapshot_stride`` nodes (first and last included).

    ``exponents`` is an ExponentReport; when given (and carrying norm
    orders) the ls and scaled columns use its s_i and xi_i, otherwise those
    columns stay blank.
    """
    s_orders = xi = None
    if exponents is not None and getattr(exponents, "s", None) is not None:
        s_orders = exponents.s
        xi = exponents.xi

    plan = _Plan(config)
    nodes = config.mesh.nodes()
    n_nodes = nodes.size
    pair = make_initial_data(config.init, config.grid, config.params)

    t_arr = np.full(n_nodes, math.nan)
    linf = np.full((n_nodes, 2), math.nan)
    ls = np.full((n_nodes, 2), math.nan)
    scaled = np.full((n_nodes, 2), math.nan)
    mass = np.full((n_nodes, 2), math.nan)
    iters = np.zeros(n_nodes, dtype=int)

    snapshots = []
    total_clamped = 0

    def record(k, fp, n_iter):
        t_arr[k] = fp.time
        iters[k] = n_iter
        for i in (0, 1):
            order = None if s_orders is None else s_orders[i]
            li, lsi, mi = _grid_norms(fp.components()[i], config.grid, order)
            linf[k, i] = li
            ls[k, i] = lsi
            mass[k, i] = mi
            scaled[k, i] = math.nan if xi is None else fp.time ** xi[i] * lsi

    record(0, pair, 0)
    snapshots.append(pair.copy())
    status = SolveStatus("completed", float(nodes[-1]))
    recorded = 1

    for k in range(1, n_nodes):
        try:
            pair, diag = step(pair, float(nodes[k]), plan)
        except Divergence as exc:
            status = SolveStatus("diverged", exc.time)
            log.warning("divergence signal at t=%.6g", exc.time)
            break
        except StepRejected as exc:
            status = SolveStatus("step_rejected", exc.time)
            log.warning("step rejected at t=%.6g (last change %.3e)", exc.time, exc.diff)
            break
        total_clamped += diag.clamped
        record(k, pair, diag.iterations)
        recorded = k + 1
        if k % config.snapshot_stride == 0 or k == n_nodes - 1:
            snapshots.append(pair.copy())

    norms = NormSeries(t=t_arr[:recorded], linf=linf[:recorded], ls=ls[:recorded],
                       scaled=scaled[:recorded], mass=mass[:recorded],
                       picard_iters=iters[:recorded], s_orders=s_orders, xi=xi)
    tail_budget = max(
        tail_mass_bound(KernelSpec(config.params.alpha[i], config.grid.dim),
                        max(config.mesh.horizon ** config.params.rho[i], 1e-300),
                        config.grid.half_length)
        for i in (0, 1))
    diagnostics = {
        "clamped_values": total_clamped,
        "tail_mass_budget": tail_budget,
        "recommended_half_length": recommended_half_length(config.params, config.mesh.horizon),
    }
    return SolveResult(snapshots=snapshots, norms=norms, status=status, diagnostics=diagnostics)


# ---------------------------------------------------------------------------
# snapshot files: little-endian, magic "FWCS", version 1

_HEADER = struct.Struct("<4sIII")


def write_snapshot(path, pair: FieldPair, grid: SpectralGrid, params: SystemParams):
    buf = bytearray()
    buf += _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, grid.dim, grid.n)
    buf += struct.pack("<dd", grid.half_length, pair.time)
    buf += struct.pack("<8d", params.alpha[0], params.alpha[1],
                       params.beta[0], params.beta[1],
                       params.rho[0], params.rho[1],
                       params.sigma[0], params.sigma[1])
    buf += np.ascontiguousarray(pair.u1, dtype="<f8").tobytes()
    buf += np.ascontiguousarray(pair.u2, dtype="<f8").tobytes()
    Path(path).write_bytes(bytes(buf))


def read_snapshot(path):
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size + 80:
        raise SnapshotFormatError(f"{path}: truncated snapshot")
    magic, version, dim, n = _HEADER.unpack_from(raw, 0)
    if magic != SNAPSHOT_MAGIC:
        raise SnapshotFormatError(f"{path}: bad magic {magic!r}")
    if version != SNAPSHOT_VERSION:
        raise SnapshotFormatError(f"{path}: unsupported version {version}")
    off = _HEADER.size
    half_length, time = struct.unpack_from("<dd", raw, off)
    off += 16
    pvals = struct.unpack_from("<8d", raw, off)
    off += 64
    count = n**dim
    expected = off + 2 * count * 8
    if len(raw) != expected:
        raise SnapshotFormatError(f"{path}: expected {expected} bytes, got {len(raw)}")
    shape = (n,) * dim
    u1 = np.frombuffer(raw, dtype="<f8", count=count, offset=off).reshape(shape).copy()
    u2 = np.frombuffer(raw, dtype="<f8", count=count, offset=off + count * 8).reshape(shape).copy()
    grid = SpectralGrid(dim, n, half_length)
    params = SystemParams((pvals[0], pvals[1]), (pvals[2], pvals[3]),
                          (pvals[4], pvals[5]), (pvals[6], pvals[7]), dim)
    return FieldPair(u1, u2, time), grid, params
