"""Randomize-then-optimize Metropolis-Hastings sampler.

The transformed posterior over h has the least-squares form
-log pi(h) = 1/2 ||F(h)||^2 + const with

    F(h) = [ h ; (A B^-1 g(h) - y) / sigma ],

whose Jacobian is J(h) = [ I ; (A B^-1 / sigma) diag(g'(h)) ].  A chain is
produced in three passes: independent proposal solves of the projected
stochastic system Q^T (F(h) - v) = 0 with v ~ N(0, I), a serial
Metropolis-Hastings sweep using the weights

    log c(h) = log|det Q^T J(h)| + 1/2 ||F(h)||^2 - 1/2 ||Q^T F(h)||^2,

and the back-transform f = T(h).  Q comes from the thin QR factorization
of J at the MAP point.

Proposal solves start from the MAP point.  The batch engine iterates all
pending proposals together with the Jacobian frozen at the MAP point (one
LU factorization shared by every proposal, rank-1-free updates per sweep);
columns that stall fall back to the exact damped Gauss-Newton solver used
by `rto_propose`.  Both paths must satisfy the same cost bound e < eta, so
they are interchangeable solutions of the same optimization problem.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve, lu_factor, lu_solve, qr

from .gengauss import TAIL_SATURATION_LIMIT, g1d, g1d_deriv
from .prior import Posterior
from .wavelets import b_inverse_matrix

__all__ = [
    "RtoConfig",
    "RtoState",
    "ChainResult",
    "ChainError",
    "SingularJacobianError",
    "GaussNewtonReport",
    "MapEstimate",
    "ProposalResult",
    "residual_F",
    "jacobian_JA",
    "solve_map",
    "compute_Q",
    "rto_propose",
    "run_chain",
]


class ChainError(RuntimeError):
    """Raised when a chain cannot be produced (e.g. no valid proposal)."""


class SingularJacobianError(RuntimeError):
    """QR factor of the MAP Jacobian is numerically rank deficient."""


@dataclass(frozen=True)
class RtoConfig:
    """Sampler configuration.

    eta is the proposal cost-acceptance threshold; by default
    max(1e-8, 1e3 * step_tol).  map_grad_tol / step_tol / max_iterations
    control the damped Gauss-Newton solves; the gradient tolerance is
    relative to the residual norm ||F||.
    """

    n_samples: int
    eta: float | None = None
    map_grad_tol: float = 1e-6
    step_tol: float = 1e-12
    max_iterations: int = 200
    seed: int = 0
    workers: int = 1
    batch_sweeps: int = 60

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.eta is None:
            object.__setattr__(self, "eta", max(1e-8, 1e3 * self.step_tol))
        if self.eta <= self.step_tol:
            raise ValueError(f"eta={self.eta} must exceed the optimizer step tolerance")


@dataclass
class GaussNewtonReport:
    converged: bool
    n_iterations: int
    grad_norm: float
    objective: float
    message: str


@dataclass
class MapEstimate:
    h_map: np.ndarray
    report: GaussNewtonReport


@dataclass
class ProposalResult:
    h: np.ndarray
    cost: float
    log_c: float
    valid: bool
    tail_saturated: bool = False


@dataclass
class RtoState:
    """Precomputed MAP point, thin-QR factor, and the initial MH weight.

    The chain's initial state h0 is an extra RTO proposal drawn from its
    own RNG stream: in strongly nonlinear problems the MAP itself is
    exponentially atypical under the RTO density (its weight c can sit
    tens of log units below any proposal's), and a chain started there
    never accepts.  When that extra solve fails the MAP is used after all.
    """

    h_map: np.ndarray
    Q: np.ndarray
    h_initial: np.ndarray
    log_c_initial: float
    map_report: GaussNewtonReport


@dataclass
class ChainResult:
    """Proposals, accepted chain, weights and flags of one RTO-MH run."""

    h_proposals: np.ndarray     # (N, n)
    h_samples: np.ndarray       # (N, n)
    f_samples: np.ndarray       # (N, n)
    log_c: np.ndarray           # (N,) proposal weights (log scale)
    costs: np.ndarray           # (N,) final proposal costs e^i
    valid: np.ndarray           # (N,) proposal solve succeeded and e < eta
    accepted: np.ndarray        # (N,) MH acceptance flags
    tail_flags: np.ndarray      # (N,) proposal touched the saturated tail map
    log_c_initial: float
    h_map: np.ndarray
    acceptance_rate: float
    wall_time: float
    n_fallback: int             # proposals solved by the exact per-sample path

    @property
    def n_accepted(self) -> int:
        return int(self.accepted.sum())


class TransformedSystem:
    """Dense precomputation of the transformed least-squares system.

    Holds M = A B^-1 / sigma and derived Gram matrices; heavy to build
    (O(n^2) memory) but immutable afterwards, matching the desk-scale
    design where Q is materialized densely anyway.
    """

    def __init__(self, posterior: Posterior):
        prior = posterior.prior
        self.gg = prior.gg
        self.n = posterior.n
        self.m = posterior.m
        self.Binv = b_inverse_matrix(prior.wavelet, prior.weights)
        self.M = posterior.forward.apply_to_columns(self.Binv) / posterior.sigma
        self.yhat = posterior.data / posterior.sigma
        self.MtM = self.M.T @ self.M

    def g(self, h):
        return g1d(h, self.gg)

    def gdiag(self, h):
        return g1d_deriv(h, self.gg)

    def residual(self, h: np.ndarray) -> np.ndarray:
        return np.concatenate([h, self.M @ self.g(h) - self.yhat])

    def jacobian(self, h: np.ndarray) -> np.ndarray:
        J = np.empty((self.n + self.m, self.n))
        J[: self.n] = np.eye(self.n)
        J[self.n:] = self.M * self.gdiag(h)[None, :]
        return J


def residual_F(h: np.ndarray, posterior: Posterior) -> np.ndarray:
    """F(h) = [h; (A B^-1 g(h) - y)/sigma]; -log posterior = ||F||^2 / 2 + const."""
    return TransformedSystem(posterior).residual(np.asarray(h, dtype=np.float64))


def jacobian_JA(h: np.ndarray, posterior: Posterior) -> np.ndarray:
    """Dense (n+m) x n Jacobian of F at h."""
    return TransformedSystem(posterior).jacobian(np.asarray(h, dtype=np.float64))


def _solve_map_system(system: TransformedSystem, config: RtoConfig, h_init=None) -> MapEstimate:
    """Damped Gauss-Newton minimization of 1/2 ||F(h)||^2.

    Levenberg-style damping on the Gauss-Newton normal equations, with the
    damping parameter grown tenfold whenever a step fails to decrease the
    objective and shrunk tenfold on success.
    """
    n = system.n
    h = np.zeros(n) if h_init is None else np.asarray(h_init, dtype=np.float64).copy()
    if not np.all(np.isfinite(h)):
        raise ValueError("h_init must be finite")
    r2 = system.M @ system.g(h) - system.yhat
    obj = 0.5 * (h @ h + r2 @ r2)
    mu = 1e-4
    message = "max iterations reached"
    converged = False
    it = 0
    grad_norm = np.inf
    for it in range(1, config.max_iterations + 1):
        d = system.gdiag(h)
        grad = h + d * (system.M.T @ r2)
        grad_norm = float(np.linalg.norm(grad))
        grad_scale = max(1.0, np.sqrt(2.0 * obj))
        if grad_norm < config.map_grad_tol * grad_scale:
            converged, message = True, "gradient tolerance reached"
            break
        JtJ = system.MtM * np.outer(d, d)
        JtJ[np.diag_indices_from(JtJ)] += 1.0
        step_ok = False
        while mu < 1e14:
            H = JtJ.copy()
            H[np.diag_indices_from(H)] += mu
            dh = cho_solve(cho_factor(H, lower=True), -grad)
            h_new = h + dh
            r2_new = system.M @ system.g(h_new) - system.yhat
            obj_new = 0.5 * (h_new @ h_new + r2_new @ r2_new)
            if obj_new < obj:
                mu = max(mu / 10.0, 1e-15)
                step_ok = True
                break
            mu *= 10.0
        if not step_ok:
            # objective improvements below float granularity; accept the
            # iterate when the gradient is already small relative to ||F||
            converged = grad_norm < 1e3 * config.map_grad_tol * grad_scale
            message = (
                "stagnated near optimum" if converged else "damping saturated without descent"
            )
            break
        h, r2, obj = h_new, r2_new, obj_new
        if np.linalg.norm(dh) < config.step_tol * (1.0 + np.linalg.norm(h)):
            converged, message = True, "step tolerance reached"
            break
    report = GaussNewtonReport(converged, it, grad_norm, float(obj), message)
    return MapEstimate(h_map=h, report=report)


def solve_map(posterior: Posterior, config: RtoConfig, h_init=None) -> MapEstimate:
    """MAP estimate of the transformed posterior (minimizer of 1/2 ||F||^2).

    Non-convergence is reported, not raised: the returned estimate carries
    the best iterate and a report, and the caller may retry with another
    initial point.
    """
    return _solve_map_system(TransformedSystem(posterior), config, h_init)


def compute_Q(h_map: np.ndarray, posterior: Posterior) -> np.ndarray:
    """Thin QR factor of the Jacobian at the MAP point; R is discarded."""
    system = TransformedSystem(posterior)
    return _compute_Q_system(system, h_map)


def _compute_Q_system(system: TransformedSystem, h_map: np.ndarray) -> np.ndarray:
    J = system.jacobian(np.asarray(h_map, dtype=np.float64))
    Q, R = qr(J, mode="economic")
    rdiag = np.abs(np.diag(R))
    if rdiag.min() < 1e-12 * rdiag.max():
        raise SingularJacobianError(
            f"rank-deficient Jacobian at MAP: min |R_ii| = {rdiag.min():.3e}"
        )
    return Q


class _ProposalEngine:
    """Shared projected-system quantities for proposal solves and weights."""

    def __init__(self, system: TransformedSystem, h_map: np.ndarray, Q: np.ndarray, config: RtoConfig):
        n = system.n
        self.system = system
        self.config = config
        self.h_map = np.asarray(h_map, dtype=np.float64)
        self.Q = Q
        self.QT1 = Q[:n].T.copy()          # n x n
        self.QT2 = Q[n:].T.copy()          # n x m
        self.P2 = self.QT2 @ system.M      # n x n
        self.Qty_part = self.QT2 @ system.yhat
        d_map = system.gdiag(self.h_map)
        self.lu_map = lu_factor(self.QT1 + self.P2 * d_map[None, :])
        self.lu_chord = self.lu_map
        # converge proposals two decades below the acceptance threshold
        self.cost_target = 1e-2 * config.eta

    def install_chord_point(self, h: np.ndarray):
        """Freeze the batch solver's chord Jacobian at a typical point.

        The MAP Jacobian models the first Newton step well, but iterates
        land in the posterior's typical set where g' differs from its MAP
        values; chord sweeps with a typical-point Jacobian converge where
        the MAP-frozen ones stall.
        """
        self.lu_chord = lu_factor(self.projected_jacobian(self.system.gdiag(h)))

    def projected_jacobian(self, d: np.ndarray) -> np.ndarray:
        return self.QT1 + self.P2 * d[None, :]

    def projected_residual(self, h: np.ndarray) -> np.ndarray:
        return self.QT1 @ h + self.P2 @ self.system.g(h) - self.Qty_part

    def log_c(self, h: np.ndarray) -> float:
        """log c(h) = log|det Q^T J(h)| + (||F||^2 - ||Q^T F||^2) / 2."""
        system = self.system
        g = system.g(h)
        r2 = system.M @ g - system.yhat
        qtf = self.QT1 @ h + self.QT2 @ r2
        logdet = _logabsdet_lu(self.projected_jacobian(system.gdiag(h)))
        return float(logdet + 0.5 * (h @ h + r2 @ r2) - 0.5 * (qtf @ qtf))

    def draw_v_projected(self, rng) -> np.ndarray:
        """Q^T v for v ~ N(0, I_{n+m})."""
        v = rng.standard_normal(self.system.n + self.system.m)
        return self.QT1 @ v[: self.system.n] + self.QT2 @ v[self.system.n:]

    def solve_single(self, w: np.ndarray) -> tuple[np.ndarray, float, bool]:
        """Exact Gauss-Newton solve of Q^T F(h) = w from the MAP point.

        Returns (h, cost, converged).  The projected system is square, so
        the undamped Gauss-Newton step is a Newton step solved directly by
        LU with a halving line search; iterations whose step fails even
        after halving fall back to the Levenberg damping loop (mu starting
        at 1e-4, tenfold up on reject, tenfold down on accept).
        """
        cfg = self.config
        h = self.h_map.copy()
        r = self.projected_residual(h) - w
        cost = float(r @ r)
        mu = 1e-4
        for _ in range(cfg.max_iterations):
            if cost < self.cost_target:
                return h, cost, True
            Jr = self.projected_jacobian(self.system.gdiag(h))
            step_ok = False
            try:
                dh_full = lu_solve(lu_factor(Jr), -r)
            except np.linalg.LinAlgError:
                dh_full = None
            if dh_full is not None:
                scale = 1.0
                for _ in range(6):
                    h_new = h + scale * dh_full
                    r_new = self.projected_residual(h_new) - w
                    cost_new = float(r_new @ r_new)
                    if cost_new < cost:
                        dh = scale * dh_full
                        step_ok = True
                        break
                    scale *= 0.5
            if not step_ok:
                grad = Jr.T @ r
                JtJ = Jr.T @ Jr
                while mu < 1e14:
                    H = JtJ.copy()
                    H[np.diag_indices_from(H)] += mu
                    try:
                        dh = cho_solve(cho_factor(H, lower=True), -grad)
                    except np.linalg.LinAlgError:
                        mu *= 10.0
                        continue
                    h_new = h + dh
                    r_new = self.projected_residual(h_new) - w
                    cost_new = float(r_new @ r_new)
                    if cost_new < cost:
                        mu = max(mu / 10.0, 1e-15)
                        step_ok = True
                        break
                    mu *= 10.0
            if not step_ok:
                return h, cost, cost < self.cost_target
            if np.linalg.norm(dh) < cfg.step_tol * (1.0 + np.linalg.norm(h_new)):
                return h_new, cost_new, cost_new < self.cost_target
            h, r, cost = h_new, r_new, cost_new
        return h, cost, cost < self.cost_target

    def solve_batch(self, W: np.ndarray):
        """Solve all columns of W at once with shared frozen Jacobians.

        One full Newton step from the MAP point (its Jacobian is exact
        there and shared by every column), then chord sweeps with the
        typical-point factorization; each column carries its own step
        damping, and columns that fail to reach the cost target within
        the sweep budget are re-solved by `solve_single`.
        Returns (H, costs, converged, n_fallback).
        """
        cfg = self.config
        n, B = self.system.n, W.shape[1]
        H = np.tile(self.h_map[:, None], (1, B))
        R = self.projected_residual_batch(H) - W
        cost = np.sum(R * R, axis=0)
        # full shared Newton step from the common start, taken even when
        # the raw cost rises: it lands in the solution's basin, where the
        # typical-point sweeps converge (they stall from the MAP region)
        H_try = H - lu_solve(self.lu_map, R)
        R_try = self.projected_residual_batch(H_try) - W
        cost_try = np.sum(R_try * R_try, axis=0)
        finite = np.isfinite(cost_try)
        H[:, finite] = H_try[:, finite]
        R[:, finite] = R_try[:, finite]
        cost[finite] = cost_try[finite]
        step = np.ones(B)
        active = cost >= self.cost_target
        stall_watch = 0
        prev_active, prev_median = B + 1, np.inf
        for _ in range(cfg.batch_sweeps):
            if not active.any():
                break
            idx = np.flatnonzero(active)
            dH = lu_solve(self.lu_chord, R[:, idx])
            H_trial = H[:, idx] - step[idx][None, :] * dH
            R_trial = self.projected_residual_batch(H_trial) - W[:, idx]
            cost_trial = np.sum(R_trial * R_trial, axis=0)
            better = cost_trial < cost[idx]
            take = idx[better]
            H[:, take] = H_trial[:, better]
            R[:, take] = R_trial[:, better]
            cost[take] = cost_trial[better]
            step[take] = np.minimum(1.0, step[take] * 2.0)
            worse = idx[~better]
            step[worse] *= 0.5
            active[cost < self.cost_target] = False
            active[step < 1e-6] = False  # stalled; leave to the fallback pass
            # bail out when the sweep stops making headway: the exact
            # per-column solver handles the remainder faster
            n_active = int(active.sum())
            median_cost = float(np.median(cost[active])) if n_active else 0.0
            if n_active < prev_active or median_cost < 0.8 * prev_median:
                stall_watch = 0
            else:
                stall_watch += 1
                if stall_watch >= 8:
                    break
            prev_active, prev_median = n_active, median_cost
        converged = cost < self.cost_target
        n_fallback = 0
        for j in np.flatnonzero(~converged):
            H[:, j], cost[j], ok = self.solve_single(W[:, j])
            converged[j] = ok
            n_fallback += 1
        return H, cost, converged, n_fallback

    def projected_residual_batch(self, H: np.ndarray) -> np.ndarray:
        G = g1d(H, self.system.gg)
        return self.QT1 @ H + self.P2 @ G - self.Qty_part[:, None]

    def weights_batch(self, H: np.ndarray) -> np.ndarray:
        """log c for each column of H; the LU per column is the O(n^3) cost."""
        system = self.system
        G = g1d(H, system.gg)
        D = g1d_deriv(H, system.gg)
        R2 = system.M @ G - system.yhat[:, None]
        QtF = self.QT1 @ H + self.QT2 @ R2
        quad = 0.5 * (np.sum(H * H, axis=0) + np.sum(R2 * R2, axis=0) - np.sum(QtF * QtF, axis=0))
        out = np.empty(H.shape[1])
        for j in range(H.shape[1]):
            out[j] = _logabsdet_lu(self.projected_jacobian(D[:, j])) + quad[j]
        return out


def _logabsdet_lu(Amat: np.ndarray) -> float:
    lu, _ = lu_factor(Amat)
    return float(np.sum(np.log(np.abs(np.diag(lu)))))


def rto_propose(state: RtoState, posterior: Posterior, config: RtoConfig, seed) -> ProposalResult:
    """Generate one RTO proposal: draw v, solve the projected system, weigh it.

    The proposal is flagged invalid when the optimizer fails or the final
    cost e = ||Q^T (F(h) - v)||^2 reaches eta; invalid proposals are
    auto-rejected by the MH sweep.
    """
    engine = _ProposalEngine(TransformedSystem(posterior), state.h_map, state.Q, config)
    return _propose_with_engine(engine, seed)


def _propose_with_engine(engine: _ProposalEngine, seed) -> ProposalResult:
    rng = np.random.default_rng(seed)
    w = engine.draw_v_projected(rng)
    h, cost, ok = engine.solve_single(w)
    valid = bool(ok and cost < engine.config.eta)
    return ProposalResult(
        h=h,
        cost=cost,
        log_c=engine.log_c(h) if valid else -np.inf,
        valid=valid,
        tail_saturated=bool(np.any(np.abs(h) > TAIL_SATURATION_LIMIT)),
    )


def _proposal_chunk(engine: _ProposalEngine, seeds) -> dict:
    """Solve one block of proposals; used directly and by worker processes."""
    n = engine.system.n
    B = len(seeds)
    W = np.empty((n, B))
    for j, s in enumerate(seeds):
        W[:, j] = engine.draw_v_projected(np.random.default_rng(s))
    H, costs, converged, n_fallback = engine.solve_batch(W)
    valid = converged & (costs < engine.config.eta)
    log_c = np.full(B, -np.inf)
    if valid.any():
        log_c[valid] = engine.weights_batch(H[:, valid])
    return {
        "H": H,
        "costs": costs,
        "valid": valid,
        "log_c": log_c,
        "tail": np.any(np.abs(H) > TAIL_SATURATION_LIMIT, axis=0),
        "n_fallback": n_fallback,
    }


_WORKER_ENGINE = None


def _worker_init(engine):
    global _WORKER_ENGINE
    _WORKER_ENGINE = engine


def _worker_chunk(seeds):
    return _proposal_chunk(_WORKER_ENGINE, seeds)


def run_chain(posterior: Posterior, config: RtoConfig) -> ChainResult:
    """Full RTO-MH run: MAP + QR offline, proposals, MH sweep, back-transform.

    The chain starts from an extra proposal draw (see RtoState).  Proposal
    i always consumes the i-th spawned RNG stream and the MH sweep has its
    own stream, so results are reproducible for a given seed and, up to
    floating-point scheduling, independent of the worker count.
    """
    t0 = time.perf_counter()
    system = TransformedSystem(posterior)
    map_est = _solve_map_system(system, config)
    if not map_est.report.converged:
        raise ChainError(f"MAP solve did not converge: {map_est.report.message}")
    Q = _compute_Q_system(system, map_est.h_map)
    engine = _ProposalEngine(system, map_est.h_map, Q, config)

    root = np.random.SeedSequence(config.seed)
    mh_seq, prop_root = root.spawn(2)
    all_seeds = prop_root.spawn(config.n_samples + 1)
    init_seed, prop_seeds = all_seeds[0], all_seeds[1:]

    initial = _propose_with_engine(engine, init_seed)
    if initial.valid:
        h0, log_c0 = initial.h, initial.log_c
    else:
        h0, log_c0 = map_est.h_map, engine.log_c(map_est.h_map)
    state = RtoState(map_est.h_map, Q, h0, log_c0, map_est.report)
    engine.install_chord_point(h0)

    N, n = config.n_samples, system.n
    h_prop = np.empty((N, n))
    costs = np.empty(N)
    valid = np.zeros(N, dtype=bool)
    log_c = np.full(N, -np.inf)
    tail_flags = np.zeros(N, dtype=bool)
    n_fallback = 0

    if config.workers == 1:
        chunks = [(0, _proposal_chunk(engine, prop_seeds))]
    else:
        bounds = np.linspace(0, N, config.workers + 1).astype(int)
        spans = [(int(a), prop_seeds[a:b]) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        with ProcessPoolExecutor(
            max_workers=config.workers, initializer=_worker_init, initargs=(engine,)
        ) as pool:
            results = pool.map(_worker_chunk, [s for _, s in spans])
            chunks = [(start, res) for (start, _), res in zip(spans, results)]

    for start, res in chunks:
        span = slice(start, start + res["H"].shape[1])
        h_prop[span] = res["H"].T
        costs[span] = res["costs"]
        valid[span] = res["valid"]
        log_c[span] = res["log_c"]
        tail_flags[span] = res["tail"]
        n_fallback += res["n_fallback"]

    if not valid.any():
        raise ChainError(
            f"all {N} proposals invalid (costs in [{costs.min():.3e}, {costs.max():.3e}], "
            f"eta={config.eta})"
        )

    # serial MH sweep in log space: accept iff log u < log c(prev) - log c(prop)
    rng_mh = np.random.default_rng(mh_seq)
    h_samples = np.empty((N, n))
    accepted = np.zeros(N, dtype=bool)
    h_prev = state.h_initial
    log_c_prev = state.log_c_initial
    for i in range(N):
        log_u = np.log(rng_mh.uniform())
        if valid[i] and log_u < log_c_prev - log_c[i]:
            h_prev = h_prop[i]
            log_c_prev = log_c[i]
            accepted[i] = True
        h_samples[i] = h_prev

    # back-transform f = T(h) = B^-1 g(h), batched over the chain
    f_samples = (system.Binv @ g1d(h_samples.T, system.gg)).T

    return ChainResult(
        h_proposals=h_prop,
        h_samples=h_samples,
        f_samples=f_samples,
        log_c=log_c,
        costs=costs,
        valid=valid,
        accepted=accepted,
        tail_flags=tail_flags,
        log_c_initial=log_c0,
        h_map=state.h_map,
        acceptance_rate=float(accepted.mean()),
        wall_time=time.perf_counter() - t0,
        n_fallback=n_fallback,
    )
