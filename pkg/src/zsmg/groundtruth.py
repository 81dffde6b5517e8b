"""Independent ground-truth solvers for zero-sum Markov games.

Nothing in this module shares code with the learner: matrix games are solved by
a small dense simplex method, the Markov game itself by value iteration over
per-state matrix games, and distances to the optimal-strategy polytopes by
exact active-set projection.  These routines provide the yardstick against
which learned policies are measured.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.optimize import nnls

from .games import MarkovGame, JointPolicy, best_response, q_from_v

__all__ = [
    "MatrixGameSolution",
    "GroundTruth",
    "DistanceResult",
    "LpSolveError",
    "solve_matrix_game",
    "shapley_solve",
    "duality_gap_state",
    "game_duality_gap",
    "dist_to_optimal_sets",
    "dist_state",
    "margin_constant_estimate",
]


class LpSolveError(ArithmeticError):
    """Simplex failure; carries the offending matrix for post-mortem."""

    def __init__(self, message: str, matrix: np.ndarray):
        super().__init__(message)
        self.matrix = np.array(matrix)


@dataclass(frozen=True)
class MatrixGameSolution:
    """Minimax solution of a bilinear matrix game min_x max_y x^T Q y."""

    value: float
    x: np.ndarray          # (A,) minimizer's optimal mixed strategy
    y: np.ndarray          # (B,) maximizer's optimal mixed strategy
    col_payoffs: np.ndarray  # (B,) payoffs x^T Q, all <= value + tol
    row_payoffs: np.ndarray  # (A,) payoffs Q y, all >= value - tol


def _simplex_pivot(q: np.ndarray, tol: float) -> tuple[float, np.ndarray, np.ndarray]:
    """Solve min_x max_b (Q^T x)_b over the simplex by primal simplex with Bland's rule.

    Uses the classic value-variable LP: minimize v subject to Q^T x <= v * 1,
    sum(x) = 1, x >= 0.  Entries are shifted positive first so the value
    variable stays basic throughout.  Returns (value, x, y) with y read off the
    dual multipliers of the column constraints.
    """
    n_a, n_b = q.shape
    shift = 1.0 - float(q.min())
    qs = q + shift

    # Standard form: columns are [x_1..x_A, v, s_1..s_B]; rows are the B column
    # constraints (with slacks) followed by the simplex equality.
    m = n_b + 1
    n = n_a + 1 + n_b
    a_mat = np.zeros((m, n))
    a_mat[:n_b, :n_a] = qs.T
    a_mat[:n_b, n_a] = -1.0
    a_mat[:n_b, n_a + 1:] = np.eye(n_b)
    a_mat[n_b, :n_a] = 1.0
    b_vec = np.zeros(m)
    b_vec[n_b] = 1.0
    cost = np.zeros(n)
    cost[n_a] = 1.0

    # Start from the vertex x = e_0, v = max_b Q[0, b]: basic variables are
    # x_0, v, and every slack except the binding column's.
    b_star = int(np.argmax(qs[0]))
    basis = [0, n_a] + [n_a + 1 + b for b in range(n_b) if b != b_star]
    basis = np.array(sorted(basis))

    for _ in range(20_000):
        b_inv_ab = np.linalg.solve(a_mat[:, basis], np.column_stack([b_vec, np.eye(m)]))
        x_b = b_inv_ab[:, 0]
        b_inv = b_inv_ab[:, 1:]
        duals = cost[basis] @ b_inv
        reduced = cost - duals @ a_mat
        reduced[basis] = 0.0
        entering_candidates = np.nonzero(reduced < -tol)[0]
        if entering_candidates.size == 0:
            x = np.zeros(n)
            x[basis] = x_b
            sol_x = x[:n_a]
            value = float(x[n_a]) - shift
            y = -duals[:n_b]
            return value, sol_x, y
        j = int(entering_candidates[0])  # Bland: lowest index enters
        direction = b_inv @ a_mat[:, j]
        positive = direction > tol
        if not positive.any():
            raise LpSolveError("matrix-game LP is unbounded (should not happen)", q)
        ratios = np.full(m, np.inf)
        ratios[positive] = x_b[positive] / direction[positive]
        best = ratios.min()
        ties = np.nonzero(ratios <= best + tol * max(1.0, best))[0]
        leave_pos = ties[np.argmin(basis[ties])]  # Bland: lowest basic index leaves
        basis[leave_pos] = j
        basis.sort()
    raise LpSolveError("simplex iteration cap exceeded", q)


def solve_matrix_game(q: np.ndarray, tol: float = 1e-9) -> MatrixGameSolution:
    """Exact minimax solution of the matrix game where the row player minimizes.

    The optimal strategies are certified directly: every column payoff under
    ``x`` is at most ``value + tol`` and every row payoff under ``y`` at least
    ``value - tol``; a failed certificate raises ``LpSolveError``.
    """
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 2 or q.size == 0:
        raise ValueError(f"expected a nonempty 2-D payoff matrix, got shape {q.shape}")
    value, x, y = _simplex_pivot(q, tol=1e-11)

    x = np.maximum(x, 0.0)
    x /= x.sum()
    y = np.maximum(y, 0.0)
    ysum = y.sum()
    if not (0.5 < ysum < 2.0):
        raise LpSolveError(f"dual strategy sum {ysum:.6f} far from 1", q)
    y /= ysum

    col_payoffs = x @ q
    row_payoffs = q @ y
    if col_payoffs.max() > value + tol or row_payoffs.min() < value - tol:
        raise LpSolveError(
            f"minimax certificate failed: value={value!r}, "
            f"max col payoff={col_payoffs.max()!r}, min row payoff={row_payoffs.min()!r}",
            q,
        )
    return MatrixGameSolution(
        value=value, x=x, y=y, col_payoffs=col_payoffs, row_payoffs=row_payoffs
    )


@dataclass(frozen=True)
class GroundTruth:
    """Minimax values, stage games, and equilibrium witnesses of a Markov game."""

    v_star: np.ndarray   # (S,) minimax value per state
    q_star: np.ndarray   # (S, A, B) stage game at the fixed point
    x_star: np.ndarray   # (S, A) per-state minimax witness for player 1
    y_star: np.ndarray   # (S, B) per-state maximin witness for player 2
    tol: float           # solve tolerance: |val(q_star[s]) - v_star[s]| <= tol

    @property
    def witness_policy(self) -> JointPolicy:
        return JointPolicy(x=self.x_star, y=self.y_star)


def shapley_solve(game: MarkovGame, tol: float = 1e-9, max_iter: int = 1_000_000) -> GroundTruth:
    """Solve the Markov game by value iteration with per-state matrix-game solves.

    The update V <- val(q_from_v(V)) is a gamma-contraction in the sup norm.
    Iteration stops once the step size guarantees both a sup-norm error below
    ``tol`` and a game-level duality gap of the returned witnesses below
    ``2 * tol`` (the per-step threshold is ``tol * (1-gamma)^2 / (2*gamma)``,
    which bounds the sup error by ``tol * (1-gamma) / 2``).
    """
    gamma = game.gamma
    threshold = tol * (1.0 - gamma) ** 2 / (2.0 * gamma)
    v = np.zeros(game.n_states)
    for _ in range(max_iter):
        q = q_from_v(game, v)
        v_new = np.array([solve_matrix_game(q[s], tol=tol).value for s in range(game.n_states)])
        step = float(np.max(np.abs(v_new - v)))
        v = v_new
        if step <= threshold:
            break
    else:
        raise ArithmeticError(
            f"value iteration did not converge in {max_iter} iterations "
            f"(last step {step:.3e}, threshold {threshold:.3e})"
        )

    q_star = q_from_v(game, v)
    sols = [solve_matrix_game(q_star[s], tol=tol) for s in range(game.n_states)]
    for s, sol in enumerate(sols):
        if abs(sol.value - v[s]) > tol:
            raise ArithmeticError(
                f"fixed-point consistency failed at state {s}: "
                f"val={sol.value!r} vs v_star={v[s]!r}"
            )
    return GroundTruth(
        v_star=v,
        q_star=q_star,
        x_star=np.array([sol.x for sol in sols]),
        y_star=np.array([sol.y for sol in sols]),
        tol=tol,
    )


def duality_gap_state(q_star_s: np.ndarray, x_s: np.ndarray, y_s: np.ndarray) -> float:
    """Stage-game duality gap max_y' x^T Q y' - min_x' x'^T Q y at one state.

    Inner optima are attained at vertices, so this is just max-column minus
    min-row payoff.  Zero exactly at the equilibria of ``q_star_s``.
    """
    return float(np.max(x_s @ q_star_s) - np.min(q_star_s @ y_s))


def game_duality_gap(game: MarkovGame, policy: JointPolicy, tol: float = 1e-9) -> float:
    """Game-level duality gap max_s [max_y' V_{x,y'}(s) - min_x' V_{x',y}(s)].

    Both inner optimizations are full best-response MDP solves, so this is the
    exploitability of the pair in the Markov game, not just in the stage games.
    """
    v_max, _ = best_response(game, policy.x, fixed_side=1, tol=tol)
    v_min, _ = best_response(game, policy.y, fixed_side=2, tol=tol)
    return float(np.max(v_max - v_min))


# ---------------------------------------------------------------------------
# Distance to the optimal-strategy polytopes
# ---------------------------------------------------------------------------

def _kkt_residual(z, u, a_mat, b_vec, feas_tol=1e-8):
    """Stationarity + feasibility residual for u ~ argmin ||u-z||^2 over the polytope.

    Recovers multipliers for the active constraints by nonnegative least
    squares and measures how well z - u decomposes into the active normals.
    """
    feas = max(
        abs(float(u.sum()) - 1.0),
        float(np.max(-u, initial=0.0)),
        float(np.max(a_mat @ u - b_vec, initial=0.0)) if a_mat.size else 0.0,
    )
    cols = [np.ones_like(u), -np.ones_like(u)]             # free multiplier for sum(u)=1
    if a_mat.size:
        for i in np.nonzero(a_mat @ u >= b_vec - feas_tol)[0]:
            cols.append(a_mat[i])
    for j in np.nonzero(u <= feas_tol)[0]:
        basis = np.zeros_like(u)
        basis[j] = -1.0
        cols.append(basis)
    mat = np.column_stack(cols)
    _, stat = nnls(mat, z - u)
    return max(feas, float(stat))


def _affine_projection(z: np.ndarray, m_mat: np.ndarray, c_vec: np.ndarray) -> np.ndarray:
    """Euclidean projection of z onto the affine set {u : m_mat @ u = c_vec}.

    Least-norm multipliers keep the formula valid for rank-deficient row sets;
    inconsistent row sets yield some point that downstream feasibility checks
    discard.
    """
    correction, *_ = np.linalg.lstsq(m_mat @ m_mat.T, m_mat @ z - c_vec, rcond=None)
    return z - m_mat.T @ correction


def _enumerate_projection(z: np.ndarray, ineq: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Projection of z onto {u : sum(u) = 1, ineq @ u <= rhs} by active-set sweep.

    The normal cone at the projection is generated by at most n - 1 linearly
    independent constraint rows besides the sum equality, so projecting onto
    the affine hull of every row subset smaller than n and keeping the closest
    feasible candidate recovers the exact optimum: the true active set appears
    as one subset, and every other feasible candidate is distance-dominated.
    Constraint counts here are tiny (own plus opponent actions), so the
    combinatorial sweep is cheap and has no convergence failure mode.
    """
    n = z.size
    m = ineq.shape[0]
    one = np.ones((1, n))
    feas_tol = 1e-10
    best = None
    best_d = np.inf
    for k in range(n):
        for subset in combinations(range(m), k):
            idx = list(subset)
            m_mat = np.vstack([one, ineq[idx]])
            c_vec = np.concatenate([[1.0], rhs[idx]])
            u = _affine_projection(z, m_mat, c_vec)
            if abs(float(u.sum()) - 1.0) > feas_tol:
                continue
            if float(np.max(ineq @ u - rhs)) > feas_tol:
                continue
            d = float(np.sum((u - z) ** 2))
            if d < best_d:
                best, best_d = u, d
    if best is None:
        raise ArithmeticError("infeasible polytope in projection")
    return best


def _refine_on_active_set(z: np.ndarray, u: np.ndarray, a_mat: np.ndarray,
                          b_vec: np.ndarray, active_tol: float = 1e-7) -> np.ndarray:
    """Re-project z onto the affine hull of the constraints active at u.

    Once the correct active set is known the projection is a single linear
    solve, which recovers full precision from an approximately located point.
    """
    rows = [np.ones_like(u)]
    rhs = [1.0]
    for j in np.nonzero(u <= active_tol)[0]:
        basis = np.zeros_like(u)
        basis[j] = 1.0
        rows.append(basis)
        rhs.append(0.0)
    if a_mat.size:
        for i in np.nonzero(a_mat @ u >= b_vec - active_tol)[0]:
            rows.append(a_mat[i])
            rhs.append(float(b_vec[i]))
    m_mat = np.array(rows)
    c_vec = np.array(rhs)
    correction, *_ = np.linalg.lstsq(m_mat @ m_mat.T, m_mat @ z - c_vec, rcond=None)
    refined = z - m_mat.T @ correction
    return np.maximum(refined, 0.0)


def _project_polytope(z: np.ndarray, a_mat: np.ndarray, b_vec: np.ndarray,
                      kkt_tol: float = 1e-9) -> np.ndarray:
    """Euclidean projection of z onto {u in simplex : a_mat @ u <= b_vec}.

    Two-dimensional problems use the exact interval form (the feasible set is
    a segment of the simplex, so projection is a clamp).  Larger problems are
    solved by active-set enumeration plus a refinement solve; the result is
    certified against the KKT conditions before being returned.
    """
    n = z.size
    if n == 1:
        return np.ones(1)
    if n == 2:
        # u = (t, 1-t); each constraint is linear in t, so the feasible set is an interval.
        lo, hi = 0.0, 1.0
        for a, b in zip(a_mat, b_vec):
            coef = a[0] - a[1]
            rhs = b - a[1]
            if coef > 0.0:
                hi = min(hi, rhs / coef)
            elif coef < 0.0:
                lo = max(lo, rhs / coef)
            elif rhs < -1e-12:
                raise ArithmeticError("infeasible polytope in 2-action projection")
        if lo > hi + 1e-12:
            raise ArithmeticError("infeasible polytope in 2-action projection")
        t = min(max((z[0] - z[1] + 1.0) / 2.0, lo), min(hi, max(lo, hi)))
        return np.array([t, 1.0 - t])

    a_arr = np.asarray(a_mat, dtype=np.float64).reshape(-1, n)
    b_arr = np.asarray(b_vec, dtype=np.float64).reshape(-1)
    ineq = np.vstack([-np.eye(n), a_arr])
    rhs = np.concatenate([np.zeros(n), b_arr])
    u = _enumerate_projection(z, ineq, rhs)
    if _kkt_residual(z, u, a_arr, b_arr) <= kkt_tol:
        return u
    refined = _refine_on_active_set(z, u, a_arr, b_arr)
    if _kkt_residual(z, refined, a_arr, b_arr) <= kkt_tol:
        return refined
    raise ArithmeticError(
        f"projection failed to reach KKT residual {kkt_tol:.1e} "
        f"(got {_kkt_residual(z, u, a_arr, b_arr):.3e})"
    )


@dataclass(frozen=True)
class DistanceResult:
    """Squared distances of a policy pair to the per-state optimal-strategy sets."""

    per_state: np.ndarray  # (S,) dist^2(x[s] -> X*[s]) + dist^2(y[s] -> Y*[s])
    mean: float            # average of per_state over states
    x_proj: np.ndarray     # (S, A) nearest relaxed-optimal player-1 strategies
    y_proj: np.ndarray     # (S, B) nearest relaxed-optimal player-2 strategies


def dist_state(
    gt: GroundTruth, s: int, x_s: np.ndarray, y_s: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Squared distance of (x_s, y_s) to the relaxed optimal sets at state ``s``.

    The player-1 set is {u in simplex : Q*^T u <= (v* + tol) 1}; relaxing by the
    solve tolerance keeps the exact optimal set inside, so the reported distance
    is a slight underestimate (never an overestimate) of the true distance.
    """
    q = gt.q_star[s]
    v = gt.v_star[s]
    px = _project_polytope(np.asarray(x_s, dtype=np.float64), q.T, np.full(q.shape[1], v + gt.tol))
    py = _project_polytope(np.asarray(y_s, dtype=np.float64), -q, np.full(q.shape[0], -(v - gt.tol)))
    d2 = float(np.sum((x_s - px) ** 2) + float(np.sum((y_s - py) ** 2)))
    return d2, px, py


def dist_to_optimal_sets(gt: GroundTruth, policy: JointPolicy) -> DistanceResult:
    """Per-state and mean squared distance of a policy pair to the optimal sets."""
    n_states = gt.v_star.shape[0]
    per_state = np.zeros(n_states)
    x_proj = np.zeros_like(gt.x_star)
    y_proj = np.zeros_like(gt.y_star)
    for s in range(n_states):
        per_state[s], x_proj[s], y_proj[s] = dist_state(gt, s, policy.x[s], policy.y[s])
    return DistanceResult(
        per_state=per_state, mean=float(per_state.mean()), x_proj=x_proj, y_proj=y_proj
    )


def margin_constant_estimate(
    gt: GroundTruth, n_samples: int = 10_000, seed: int = 0, min_dist: float = 1e-6
) -> float:
    """Empirical estimate of the error-bound constant relating gap to distance.

    Samples strategy pairs uniformly per state, discards those closer than
    ``min_dist`` to the optimal sets, and returns the smallest observed ratio
    duality_gap / distance.  Sampling can only overestimate the true infimum,
    so treat the result as an upper bound.  Raises if every sample is discarded
    (e.g. single-action games where every strategy is optimal).
    """
    rng = np.random.default_rng(seed)
    n_states, n_a, n_b = gt.q_star.shape
    best = np.inf
    kept = 0
    for _ in range(n_samples):
        for s in range(n_states):
            x = rng.dirichlet(np.ones(n_a))
            y = rng.dirichlet(np.ones(n_b))
            d2, _, _ = dist_state(gt, s, x, y)
            d = np.sqrt(d2)
            if d < min_dist:
                continue
            kept += 1
            ratio = duality_gap_state(gt.q_star[s], x, y) / d
            if ratio < best:
                best = ratio
    if kept == 0:
        raise RuntimeError(
            "all samples were discarded: game appears fully optimal "
            "(every strategy pair is within min_dist of the optimal sets)"
        )
    return float(best)
