"""对每条假设与引理做可证伪的检查。

界只来自 app.theory.constants；统计余量只用 3·SE，数值余量为下面写明的
固定松弛量。
"""
import math
from typing import Dict, Optional, Sequence

import numpy as np

from app.config import config
from app.estimator.base import EstimatorConfig
from app.estimator.estimators import Kernel, per_trajectory
from app.estimator.survey import moment_survey
from app.exceptions import PolicyFamilyError, StepSizeWindowError
from app.mdp.core import TabularMdp
from app.mdp.dp import exact_gradient, exact_truncated_gradient, occupancy_measure
from app.mdp.sampling import sample_batch
from app.objectives import exact_truncated_objective_gradient
from app.optimizer.runner import RunRecord
from app.policy.base import BasePolicy
from app.policy.gaussian import GaussianLinearPolicy
from app.policy.softmax import SoftmaxTabularPolicy
from app.schema import CheckStatus, EstimatorKind
from app.theory.constants import (
    Abc,
    ConstantsReport,
    ConstantsSetting,
    compute_constants,
)
from app.utils.seeding import make_rng, split_seed
from app.verify.enumeration import exact_expectation
from app.verify.report import CheckReport


# 直接线性求解的精确梯度，比较时的相对松弛
NUMERIC_SLACK = 1e-9
SINGULAR_EIG = 1e-12


def _norm_sq(vector: np.ndarray) -> float:
    return float(np.dot(vector, vector))


def check_unbiasedness(
    mdp: TabularMdp,
    policy: BasePolicy,
    kind: EstimatorKind,
    horizon: int,
    lam: float = 0.0,
    kernel: Optional[Kernel] = None,
    tol: Optional[float] = None,
) -> CheckReport:
    """完全枚举下估计器的期望与精确截断（目标）梯度的最大分量差"""
    tol = config.verify.unbiasedness_tol if tol is None else tol
    estimator = EstimatorConfig(kind=kind, horizon=horizon, lam=lam)
    expectation = exact_expectation(kind, mdp, policy, horizon, lam, kernel)
    target = exact_truncated_objective_gradient(estimator.objective, mdp, policy, horizon)
    diff = np.abs(expectation - target)
    worst = int(np.argmax(diff))
    return CheckReport.inequality(
        "unbiasedness",
        measured=float(diff[worst]),
        bound=tol,
        estimator=kind.value,
        H=horizon,
        **{"lambda": lam},
        mutated=kernel is not None,
        witness_component=worst,
        expectation=expectation,
        exact=target,
    )


def check_pgt_equivalence(
    mdp: TabularMdp,
    policy: BasePolicy,
    horizon: int,
    n_trajectories: int,
    base_seed: int,
    kernel: Optional[Kernel] = None,
    tol: float = 1e-12,
) -> CheckReport:
    """逐条轨迹比较 PGT 与 GPOMDP；容差按估计值的量级缩放"""
    batch = sample_batch(mdp, policy, horizon, n_trajectories, base_seed)
    pgt = per_trajectory(EstimatorKind.PGT, batch, policy, mdp.gamma, kernel=kernel)
    gpomdp = per_trajectory(EstimatorKind.GPOMDP, batch, policy, mdp.gamma)
    diff = np.max(np.abs(pgt - gpomdp), axis=1)
    worst = int(np.argmax(diff))
    scale = max(1.0, float(np.max(np.abs(gpomdp))))
    return CheckReport.inequality(
        "pgt_equivalence",
        measured=float(diff[worst]),
        bound=tol * scale,
        H=horizon,
        n_trajectories=n_trajectories,
        mutated=kernel is not None,
        witness_seed=batch.seeds[worst],
        base_seed=base_seed,
    )


def _random_theta(rng: np.random.Generator, dim: int) -> np.ndarray:
    scale = config.verify.theta_scale
    return rng.uniform(-scale, scale, dim)


def check_els(
    policy: SoftmaxTabularPolicy, n_thetas: int, base_seed: int, tol: float = 1e-12
) -> CheckReport:
    """随机 θ 下 E_a‖score‖² = 1 − ‖π_s‖² 且 ≤ 1 − 1/|A|"""
    bound = policy.els_constants().g_squared
    worst_excess, worst_error, witness = -math.inf, 0.0, None
    for k in range(n_thetas):
        theta = _random_theta(make_rng(split_seed(base_seed, k)), policy.dim)
        candidate = policy.with_theta(theta)
        for s in range(candidate.num_states):
            p = candidate.action_probs(s)
            measured = candidate.empirical_els_check(s).measured_g2
            error = abs(measured - (1.0 - float(np.dot(p, p))))
            if measured - bound > worst_excess:
                worst_excess, witness = measured - bound, {"theta_index": k, "state": s}
            worst_error = max(worst_error, error)

    report = CheckReport.inequality(
        "els",
        measured=bound + worst_excess,
        bound=bound,
        margin=tol,
        closed_form_error=worst_error,
        witness=witness,
        base_seed=base_seed,
    )
    if worst_error > tol:
        report = report.replace(status=CheckStatus.FAIL)
    return report


def check_abc(
    mdp: TabularMdp,
    policy: BasePolicy,
    estimator: EstimatorConfig,
    n_samples: int,
    base_seed: int,
    constants: Optional[ConstantsReport] = None,
    jobs: Optional[int] = None,
) -> CheckReport:
    """E‖ĝ‖² ≤ (1−1/m)‖∇J_H‖² + ν/m，余量 3·SE；同时报告方差界"""
    if constants is None:
        setting = ConstantsSetting.for_problem(
            mdp,
            policy,
            estimator.objective,
            estimator.kind,
            estimator.horizon,
            estimator.m,
        )
        constants = compute_constants(setting)
    stats = moment_survey(mdp, policy, estimator, n_samples, base_seed, jobs=jobs)
    grad_h = exact_truncated_objective_gradient(
        estimator.objective, mdp, policy, estimator.horizon
    )
    grad_h_sq = _norm_sq(grad_h)
    abc = constants.abc
    bound = abc.B * grad_h_sq + abc.C
    margin = 3.0 * stats.std_error_second_moment

    variance_bound = (constants.nu - grad_h_sq) / estimator.m
    mean_error = np.abs(stats.mean - grad_h)
    return CheckReport.inequality(
        "abc",
        measured=stats.second_moment,
        bound=bound,
        margin=margin,
        estimator=estimator.kind.value,
        m=estimator.m,
        H=estimator.horizon,
        nu=constants.nu,
        grad_h_norm_sq=grad_h_sq,
        variance=stats.variance,
        variance_bound=variance_bound,
        variance_holds=stats.variance <= variance_bound + margin,
        max_mean_error=float(np.max(mean_error)) if mean_error.size else 0.0,
        n_samples=n_samples,
        base_seed=base_seed,
    )


def check_smoothness_lipschitz(
    mdp: TabularMdp,
    policy: BasePolicy,
    constants: ConstantsReport,
    n_pairs: int,
    radius: float,
    base_seed: int,
) -> CheckReport:
    """随机 (θ, θ′) 对上 ‖∇J(θ)−∇J(θ′)‖ ≤ L‖θ−θ′‖ 且 ‖∇J(θ)‖ ≤ Γ"""
    worst_ratio, worst_norm = 0.0, 0.0
    ratio_witness = norm_witness = None
    for k in range(n_pairs):
        rng = make_rng(split_seed(base_seed, k))
        theta = _random_theta(rng, policy.dim)
        direction = rng.normal(size=policy.dim)
        direction /= max(float(np.linalg.norm(direction)), 1e-300)
        other = theta + rng.uniform(0.0, radius) * direction

        grad = exact_gradient(mdp, policy.with_theta(theta), method="direct")
        grad_other = exact_gradient(mdp, policy.with_theta(other), method="direct")
        distance = float(np.linalg.norm(theta - other))
        ratio = 0.0
        if distance > 0.0:
            ratio = float(np.linalg.norm(grad - grad_other)) / distance
        norm = max(float(np.linalg.norm(grad)), float(np.linalg.norm(grad_other)))
        if ratio > worst_ratio:
            worst_ratio, ratio_witness = ratio, k
        if norm > worst_norm:
            worst_norm, norm_witness = norm, k

    L, lipschitz = constants.L, constants.Gamma
    smooth_ok = worst_ratio <= L * (1.0 + NUMERIC_SLACK)
    lipschitz_ok = worst_norm <= lipschitz * (1.0 + NUMERIC_SLACK)
    return CheckReport(
        check_name="smoothness_lipschitz",
        status=CheckStatus.PASS if smooth_ok and lipschitz_ok else CheckStatus.FAIL,
        measured=worst_ratio,
        bound=L,
        margin=L * NUMERIC_SLACK,
        details={
            "worst_gradient_norm": worst_norm,
            "Gamma": lipschitz,
            "smoothness_holds": smooth_ok,
            "lipschitz_holds": lipschitz_ok,
            "ratio_witness_pair": ratio_witness,
            "norm_witness_pair": norm_witness,
            "n_pairs": n_pairs,
            "radius": radius,
            "base_seed": base_seed,
        },
    )


def _fit_slope(horizons: np.ndarray, diffs: np.ndarray) -> Optional[float]:
    """在 H 列表的上半段拟合 log‖∇J_H − ∇J‖ 的斜率"""
    usable = diffs > 1e-13
    cut = np.median(horizons)
    mask = usable & (horizons >= cut)
    if mask.sum() < 2:
        mask = usable
    if mask.sum() < 2:
        return None
    return float(np.polyfit(horizons[mask], np.log(diffs[mask]), 1)[0])


def check_truncation(
    mdp: TabularMdp,
    policy: BasePolicy,
    constants: ConstantsReport,
    horizons: Sequence[int],
) -> CheckReport:
    """‖∇J_H − ∇J‖ ≤ D′γ^H，|⟨∇J_H, ∇J_H − ∇J⟩| ≤ Dγ^H，斜率 ≤ log γ + 0.01"""
    if not horizons:
        raise ValueError("check_truncation needs a nonempty horizon list")
    horizons = np.array(sorted(set(int(h) for h in horizons)))
    grad = exact_gradient(mdp, policy, method="direct")
    gamma = mdp.gamma

    diffs, rows, worst_excess, witness = [], [], -math.inf, None
    for H in horizons:
        at_h = constants.at(horizon=int(H))
        grad_h = exact_truncated_gradient(mdp, policy, int(H))
        delta = grad_h - grad
        diff = float(np.linalg.norm(delta))
        inner = abs(float(np.dot(grad_h, delta)))
        diff_bound = at_h.D_prime * gamma**H
        inner_bound = at_h.D * gamma**H
        excess = max(diff - diff_bound, inner - inner_bound)
        if excess > worst_excess:
            worst_excess, witness = excess, int(H)
        diffs.append(diff)
        rows.append(
            {
                "H": int(H),
                "diff": diff,
                "diff_bound": diff_bound,
                "inner": inner,
                "inner_bound": inner_bound,
            }
        )

    slope = _fit_slope(horizons.astype(float), np.array(diffs))
    slope_bound = math.log(gamma) + 0.01 if gamma > 0.0 else None
    slope_ok = slope is None or slope_bound is None or slope <= slope_bound
    bounds_ok = all(
        r["diff"] <= r["diff_bound"] * (1.0 + NUMERIC_SLACK) + 1e-15
        and r["inner"] <= r["inner_bound"] * (1.0 + NUMERIC_SLACK) + 1e-15
        for r in rows
    )
    return CheckReport(
        check_name="truncation",
        status=CheckStatus.PASS if bounds_ok and slope_ok else CheckStatus.FAIL,
        measured=slope,
        bound=slope_bound,
        margin=0.0,
        details={
            "bounds_hold": bounds_ok,
            "slope_holds": slope_ok,
            "worst_horizon": witness,
            "per_horizon": rows,
        },
    )


def check_weak_gd_along_run(
    run: RunRecord,
    eps_prime: float = 0.0,
    delta: Optional[float] = None,
    mu_cap: Optional[float] = None,
) -> CheckReport:
    """沿一次运行估计最大的 μ 使 ε′ + ‖∇J_H(θ_t)‖ ≥ 2√μ (J* − J(θ_t))"""
    mu_cap = config.verify.mu_cap if mu_cap is None else mu_cap
    gaps = run.j_star - run.column("j")
    grad_h = np.sqrt(run.column("grad_h_norm_sq"))
    included = gaps > 1e-12

    if included.any():
        ratios = ((eps_prime + grad_h[included]) / (2.0 * gaps[included])) ** 2
        worst = int(np.flatnonzero(included)[int(np.argmin(ratios))])
        mu_hat = float(min(np.min(ratios), mu_cap))
    else:
        worst, mu_hat = None, mu_cap

    details: Dict[str, object] = {
        "eps_prime": eps_prime,
        "excluded_iterates": int((~included).sum()),
        "witness_t": worst,
        "clamped": mu_hat >= mu_cap,
        "min_gap": float(np.min(gaps)) if gaps.size else None,
    }
    if delta is not None and gaps.size:
        # 定理的两个分支只能事后判断
        details["branch"] = (
            "gap_stays_above_delta" if float(np.min(gaps)) >= delta else "gap_reached_delta"
        )
    return CheckReport(
        check_name="weak_gd",
        status=CheckStatus.PASS if mu_hat > 0.0 else CheckStatus.FAIL,
        measured=mu_hat,
        bound=None,
        details=details,
    )


def estimate_fisher_min_eig(mdp: TabularMdp, policy: BasePolicy) -> CheckReport:
    """由占用测度精确组装 Fisher 矩阵，报告其最小特征值 μ_F 与 μ = μ_F²/(4G²)"""
    if isinstance(policy, SoftmaxTabularPolicy):
        occupancy = occupancy_measure(mdp, policy, method="direct")
        scores = policy.score_table()
        fisher = np.einsum("sa,sad,sae->de", occupancy, scores, scores)
        weighting = "occupancy"
    elif isinstance(policy, GaussianLinearPolicy):
        # 连续动作下没有转移，状态权重取初始分布；E_a[score scoreᵀ] = φφᵀ/σ²
        features = policy.features
        if features.shape[0] != mdp.num_states:
            raise PolicyFamilyError(
                f"gaussian features cover {features.shape[0]} states, "
                f"MDP has {mdp.num_states}"
            )
        fisher = np.einsum("s,sd,se->de", mdp.initial_dist, features, features)
        fisher /= policy.sigma**2
        weighting = "initial_dist"
    else:
        raise PolicyFamilyError(f"Fisher matrix is not available for {policy.family.value}")

    mu_f = float(np.min(np.linalg.eigvalsh(fisher)))
    g_squared = policy.els_constants().g_squared
    mu = mu_f**2 / (4.0 * g_squared) if g_squared > 0.0 else None
    details = {"mu": mu, "weighting": weighting, "family": policy.family.value}
    if mu_f <= SINGULAR_EIG:
        return CheckReport(
            check_name="fisher",
            status=CheckStatus.INCONCLUSIVE,
            measured=mu_f,
            details={
                **details,
                "reason": "Fisher information is singular; the FI assumption does not "
                "hold for this policy",
            },
        )
    return CheckReport(
        check_name="fisher", status=CheckStatus.PASS, measured=mu_f, details=details
    )


def theorem_rhs(
    abc: Abc,
    L: float,
    eta: float,
    T: int,
    delta0: float,
    D: float,
    D_prime: float,
    gamma: float,
    horizon: int,
) -> float:
    """A = 0 时的上界：2δ₀/(ηT(2−LBη)) + LCη/(2−LBη) + (2D(3−LBη)/(2−LBη) + D′²γ^H)γ^H"""
    denom = 2.0 - L * abc.B * eta
    gh = gamma**horizon
    return (
        2.0 * delta0 / (eta * T * denom)
        + L * abc.C * eta / denom
        + (2.0 * D * (3.0 - L * abc.B * eta) / denom + D_prime**2 * gh) * gh
    )


def check_theorem_bound(
    run: RunRecord,
    constants: ConstantsReport,
    exact_mode: bool = False,
    delta0: Optional[float] = None,
) -> CheckReport:
    """逐轮 ‖∇J(θ_t)‖² 的均值 ≤ A = 0 形式的上界（单侧不等式）"""
    etas = run.column("eta")
    if etas.size == 0 or np.any(etas != etas[0]):
        raise StepSizeWindowError("theorem bound needs a constant step size")
    eta = float(etas[0])

    if exact_mode:
        abc, D, D_prime = Abc.exact(), 0.0, 0.0
    else:
        abc, D, D_prime = constants.abc, constants.D, constants.D_prime
    window = None if abc.B == 0.0 else 2.0 / (constants.L * abc.B)
    if eta <= 0.0 or (window is not None and eta >= window):
        raise StepSizeWindowError(f"step size {eta} is outside (0, {window})")

    regularized = constants.setting.get("objective", "plain") != "plain"
    if delta0 is None:
        if regularized:
            raise ValueError("delta0 must be supplied for regularized objectives")
        delta0 = run.j_star - run.rows[0].j
    column = "objective_grad_norm_sq" if regularized else "grad_norm_sq"
    grads = run.column(column)

    rhs = theorem_rhs(
        abc,
        constants.L,
        eta,
        run.T,
        delta0,
        D,
        D_prime,
        constants.setting["gamma"],
        constants.horizon,
    )
    best_t = int(np.argmin(grads))
    return CheckReport.inequality(
        "theorem_bound",
        measured=float(np.mean(grads)),
        bound=rhs,
        min_grad_norm_sq=float(grads[best_t]),
        min_t=best_t,
        eta=eta,
        T=run.T,
        delta0=delta0,
        B=abc.B,
        C=abc.C,
        exact_mode=exact_mode,
        base_seed=run.base_seed,
    )



def check_exact_fosp_rate(
    run: RunRecord, checkpoints: Sequence[int], delta0: Optional[float] = None
) -> CheckReport:
    """精确 PG：每个检查点 T 上 min_{t<T} ‖∇J(θ_t)‖² ≤ 2δ₀/(ηT)，且 J(θ_t) 单调不减"""
    etas = run.column("eta")
    if etas.size == 0 or np.any(etas != etas[0]):
        raise StepSizeWindowError("FOSP rate check needs a constant step size")
    eta = float(etas[0])
    delta0 = run.j_star - run.rows[0].j if delta0 is None else delta0
    grads = run.column("grad_norm_sq")
    values = run.column("j")

    rows, worst_ratio = [], 0.0
    for T in sorted(int(c) for c in checkpoints if 0 < int(c) <= run.T):
        measured = float(np.min(grads[:T]))
        bound = 2.0 * delta0 / (eta * T)
        rows.append({"T": T, "min_grad_norm_sq": measured, "bound": bound})
        if bound > 0.0:
            worst_ratio = max(worst_ratio, measured / bound)
        elif measured > 0.0:
            worst_ratio = math.inf

    # DP 求解容差带来的数值抖动
    slack = NUMERIC_SLACK * max(1.0, float(np.max(np.abs(values))) if values.size else 1.0)
    drops = np.diff(values)
    largest_drop = float(-np.min(drops)) if drops.size else 0.0
    monotone = largest_drop <= slack
    rate_ok = worst_ratio <= 1.0 + NUMERIC_SLACK
    return CheckReport(
        check_name="exact_fosp_rate",
        status=CheckStatus.PASS if rate_ok and monotone else CheckStatus.FAIL,
        measured=worst_ratio,
        bound=1.0,
        margin=NUMERIC_SLACK,
        details={
            "checkpoints": rows,
            "monotone": monotone,
            "largest_drop": largest_drop,
            "witness_t": int(np.argmin(drops)) if drops.size else None,
            "eta": eta,
            "delta0": delta0,
            "base_seed": run.base_seed,
        },
    )
