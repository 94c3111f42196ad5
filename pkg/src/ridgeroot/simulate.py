"""Monte Carlo harness: covariance models, error laws, size/power/precision runs.

The experiment design follows a fixed template: X is n1 x (n1 + n2) with iid
standard normal entries, C = I (so m = n1 and the hypothesis is B = 0), the
coefficient matrix is rank one with its first column N(0, zeta^2), and
Y = B X + Sigma^{1/2} Z with Z drawn from the configured error law and
standardized to mean zero, variance one.

Every run is a pure function of (spec, seed): the covariance draw, each
replicate, and the null-calibration batch use independently spawned
SeedSequence substreams, so replicate sets are order-independent and results
merge deterministically by replicate index.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg
from joblib import Parallel, delayed

from .edge import oracle_edge_params
from .exceptions import RidgeRootError, SpecValidationError
from .fmatrix import LinearModel, build_sscp, largest_root
from .pipeline import FitConfig, estimate_edge_from_spectrum, make_edge_solver
from .power import AlternativePrior, select_lambda
from .stieltjes import SpectrumView
from .tracy_widom import standardized_test

SCHEMA_VERSION = 1

ERROR_LAWS = ("gaussian", "student_t4", "poisson_centered")
LAMBDA_POLICIES = ("data-driven-I", "data-driven-Sigma")
COV_KINDS = ("poly_decay", "toeplitz", "factor", "explicit")


# ---------------------------------------------------------------------------
# Covariance models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CovModel:
    """Population covariance generator, normalized to tr(Sigma) = p."""

    kind: str
    p: int
    rotate: bool = True
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in COV_KINDS:
            raise SpecValidationError(f"unknown covariance kind {self.kind!r}")
        if self.p < 2:
            raise SpecValidationError("covariance dimension p must be >= 2")


def poly_decay_eigs(p: int) -> np.ndarray:
    """tau_j = 0.01 + (0.1 + p - j)^6 for j = 1..p (descending)."""
    j = np.arange(1, p + 1)
    return 0.01 + (0.1 + p - j) ** 6


def factor_eigs(p: int) -> np.ndarray:
    """Poly-decay bulk with the first five eigenvalues spiked to (2.2-0.2j) tau_6."""
    taus = poly_decay_eigs(p)
    if p >= 6:
        j = np.arange(1, 6)
        taus[:5] = (2.2 - 0.2 * j) * taus[5]
    return taus


def three_point_eigs(p: int, a: float = 0.5, values=(1.0, 5.0, 15.0)) -> np.ndarray:
    """Spectrum of the three-point mixture A d_1 + (1-A)/2 d_5 + (1-A)/2 d_15."""
    n_low = int(round(a * p))
    n_mid = (p - n_low) // 2
    n_high = p - n_low - n_mid
    return np.concatenate(
        [np.full(n_high, values[2]), np.full(n_mid, values[1]), np.full(n_low, values[0])]
    )


def haar_orthogonal(p: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix: QR of a Gaussian with sign-fixed R."""
    q, r = np.linalg.qr(rng.standard_normal((p, p)))
    return q * np.sign(np.diag(r))


def make_cov(model: CovModel, rng: np.random.Generator):
    """Materialize (Sigma, eigs) for a covariance model.

    Eigenvalues are normalized so that tr(Sigma) = p; with ``rotate`` the
    eigenvectors are drawn from the Haar measure, otherwise the model's own
    basis is kept (identity for eigenvalue-specified models).
    """
    p = model.p
    vectors = None
    if model.kind == "poly_decay":
        eigs = poly_decay_eigs(p)
    elif model.kind == "factor":
        eigs = factor_eigs(p)
    elif model.kind == "toeplitz":
        rho = float(model.params.get("rho", 0.3))
        sigma = scipy.linalg.toeplitz(rho ** np.arange(p))
        eigs, vectors = np.linalg.eigh(sigma)
        eigs, vectors = eigs[::-1].copy(), vectors[:, ::-1].copy()
    elif model.kind == "explicit":
        if "eigs" in model.params:
            eigs = np.sort(np.asarray(model.params["eigs"], dtype=np.float64))[::-1]
        elif "three_point_a" in model.params:
            eigs = three_point_eigs(p, float(model.params["three_point_a"]))
        else:
            raise SpecValidationError("explicit covariance needs 'eigs' or 'three_point_a'")
        if eigs.size != p:
            raise SpecValidationError(f"explicit eigs must have length p={p}")
    eigs = np.asarray(eigs, dtype=np.float64)
    if np.any(eigs <= 0):
        raise SpecValidationError("covariance eigenvalues must be positive")
    eigs = eigs * (p / eigs.sum())

    if model.rotate:
        vectors = haar_orthogonal(p, rng)
    elif vectors is None:
        vectors = np.eye(p)
    sigma = (vectors * eigs) @ vectors.T
    sigma = 0.5 * (sigma + sigma.T)
    return sigma, eigs


def _cov_factor(model: CovModel, rng: np.random.Generator):
    """(Sigma^{1/2}, eigs) without a second eigendecomposition."""
    p = model.p
    sigma, eigs = make_cov(model, rng)
    vals, vecs = np.linalg.eigh(sigma)
    vals = np.maximum(vals, 0.0)
    sqrt = (vecs * np.sqrt(vals)) @ vecs.T
    return sqrt, eigs


# ---------------------------------------------------------------------------
# Experiment specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentSpec:
    """One Monte Carlo experiment, fully determined together with its seed."""

    kind: str  # "null_size" | "power_curve" | "estimation_table"
    cov: CovModel
    p: int
    n1: int
    n2: int
    lambdas: list | str
    error_law: str = "gaussian"
    signal_zeta: float = 0.0
    zetas: list = field(default_factory=list)
    replicates: int = 100
    seed: int = 0
    alphas: tuple = (0.05,)
    fit: FitConfig = field(default_factory=FitConfig)
    null_replicates: int = 2000
    k_roots: int = 1

    def __post_init__(self):
        problems = []
        if self.kind not in ("null_size", "power_curve", "estimation_table"):
            problems.append(f"kind: unknown value {self.kind!r}")
        if self.error_law not in ERROR_LAWS:
            problems.append(f"error_law: unknown value {self.error_law!r}")
        if self.replicates < 1:
            problems.append("replicates: must be >= 1")
        if self.p != self.cov.p:
            problems.append(f"p: {self.p} does not match cov.p = {self.cov.p}")
        if min(self.p, self.n1, self.n2) < 2:
            problems.append("p, n1, n2: must all be >= 2")
        if isinstance(self.lambdas, str):
            if self.lambdas not in LAMBDA_POLICIES:
                problems.append(f"lambdas: unknown policy {self.lambdas!r}")
        elif not self.lambdas or any(l <= 0 for l in self.lambdas):
            problems.append("lambdas: need a nonempty list of positive values")
        if self.signal_zeta < 0:
            problems.append("signal_zeta: must be >= 0")
        if self.kind == "power_curve" and not self.zetas:
            problems.append("zetas: power_curve requires a nonempty grid")
        if self.zetas and any(
            self.zetas[i] > self.zetas[i + 1] for i in range(len(self.zetas) - 1)
        ):
            problems.append("zetas: must be nondecreasing")
        if not all(0 < a < 1 for a in self.alphas):
            problems.append("alphas: levels must be in (0, 1)")
        if self.null_replicates < 20:
            problems.append("null_replicates: must be >= 20")
        if problems:
            raise SpecValidationError("invalid experiment spec: " + "; ".join(problems))

    @property
    def m(self) -> int:
        # The harness design fixes m = n1 (C = I, testing B = 0).
        return self.n1

    @property
    def n_T(self) -> int:
        return self.n1 + self.n2

    def to_dict(self) -> dict:
        out = asdict(self)
        out["fit"] = self.fit.to_dict()
        out["alphas"] = list(self.alphas)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        data = dict(data)
        data.pop("schema_version", None)
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise SpecValidationError(f"unknown spec fields: {sorted(unknown)}")
        try:
            cov = CovModel(**data.pop("cov"))
        except (KeyError, TypeError) as exc:
            raise SpecValidationError(f"cov: {exc}") from exc
        if "fit" in data:
            try:
                data["fit"] = FitConfig(**data["fit"])
            except TypeError as exc:
                raise SpecValidationError(f"fit: {exc}") from exc
        if "alphas" in data:
            data["alphas"] = tuple(data["alphas"])
        try:
            return cls(cov=cov, **data)
        except TypeError as exc:
            raise SpecValidationError(str(exc)) from exc

    @classmethod
    def from_json(cls, text: str) -> "ExperimentSpec":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SpecValidationError(f"spec is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


# ---------------------------------------------------------------------------
# Data generation
# ---------------------------------------------------------------------------

def draw_errors(law: str, shape, rng: np.random.Generator) -> np.ndarray:
    """Draws with mean zero and unit variance under the configured law."""
    if law == "gaussian":
        return rng.standard_normal(shape)
    if law == "student_t4":
        return rng.standard_t(4, size=shape) / np.sqrt(2.0)  # var of t4 is 2
    if law == "poisson_centered":
        return rng.poisson(1.0, size=shape) - 1.0  # Poisson(1) has unit variance
    raise SpecValidationError(f"unknown error law {law!r}")


def _simulate_sscp(spec: ExperimentSpec, sqrt_sigma: np.ndarray, zeta: float,
                   rng: np.random.Generator):
    n1, n2, p = spec.n1, spec.n2, spec.p
    n_T = spec.n_T
    X = rng.standard_normal((n1, n_T))
    Z = draw_errors(spec.error_law, (p, n_T), rng)
    Y = sqrt_sigma @ Z
    if zeta > 0:
        B = np.zeros((p, n1))
        B[:, 0] = rng.normal(0.0, zeta, size=p)
        Y = Y + B @ X
    model = LinearModel(Y=Y, X=X, C=np.eye(n1))
    return build_sscp(model)


# ---------------------------------------------------------------------------
# Replicate worker
# ---------------------------------------------------------------------------

def _run_replicate(
    spec: ExperimentSpec,
    sqrt_sigma: np.ndarray,
    sigma: np.ndarray,
    sigma_eigs: np.ndarray,
    zeta: float,
    seed: np.random.SeedSequence,
    oracle_thetas: dict | None,
    record_oracle: bool,
) -> dict:
    rng = np.random.default_rng(seed)
    try:
        sscp = _simulate_sscp(spec, sqrt_sigma, zeta, rng)
        view = SpectrumView.from_sscp(sscp)

        selection = None
        if isinstance(spec.lambdas, str):
            solver = make_edge_solver(spec.fit)
            if spec.lambdas == "data-driven-I":
                prior = AlternativePrior.identity(spec.p)
            else:
                prior = AlternativePrior.explicit(sigma)
            selection = select_lambda(
                view, sscp, prior, solver, grid_size=spec.fit.lambda_grid
            )
            lambdas = [float(selection.lambda_opt)]
        else:
            lambdas = [float(l) for l in spec.lambdas]

        entries = []
        for lam in lambdas:
            fit = estimate_edge_from_spectrum(view, lam, spec.fit)
            root = largest_root(sscp, lam, k=spec.k_roots)
            report = standardized_test(root, fit.params, spec.p, alphas=spec.alphas)
            entry = {
                "lambda": lam,
                "ell_max": root.ell_max,
                "theta1_hat": fit.params.theta1,
                "theta2_hat": fit.params.theta2,
                "rho_hat": fit.params.rho,
                "beta_hat": fit.params.beta,
                "s1_at_beta": fit.params.s1_at_beta,
                "statistic": report.statistic,
                "p_value": report.p_value,
                "reject": {str(a): bool(r) for a, r in report.reject_at.items()},
                "table": {
                    "xs": fit.table.xs,
                    "s": fit.table.s,
                    "s1": fit.table.s1,
                    "s2": fit.table.s2,
                },
            }
            if record_oracle:
                if oracle_thetas is not None and lam in oracle_thetas:
                    oracle = oracle_thetas[lam]
                else:
                    oracle = oracle_edge_params(
                        sigma_eigs, lam, view.gamma1_hat, view.gamma2_hat,
                        margin_frac=spec.fit.margin_frac, steps=spec.fit.ode_steps,
                    )
                entry["theta1_oracle"] = oracle.theta1
                entry["theta2_oracle"] = oracle.theta2
                entry["statistic_oracle"] = float(
                    spec.p ** (2.0 / 3.0) * (root.ell_max - oracle.theta1) / oracle.theta2
                )
            entries.append(entry)
        out = {"ok": True, "zeta": zeta, "entries": entries}
        if selection is not None:
            out["lambda_opt"] = float(selection.lambda_opt)
        return out
    except RidgeRootError as exc:
        return {"ok": False, "zeta": zeta, "error": f"{type(exc).__name__}: {exc}"}


def _n_jobs(replicate_count: int) -> int:
    cap = os.environ.get("HDLR_THREADS")
    try:
        cap = int(cap) if cap else os.cpu_count() or 1
    except ValueError:
        cap = os.cpu_count() or 1
    return max(1, min(cap, replicate_count))


def _run_batch(spec, sqrt_sigma, sigma, sigma_eigs, zeta, seeds, oracle_thetas,
               record_oracle):
    jobs = _n_jobs(len(seeds))
    return Parallel(n_jobs=jobs, prefer="processes")(
        delayed(_run_replicate)(
            spec, sqrt_sigma, sigma, sigma_eigs, zeta, seed, oracle_thetas,
            record_oracle,
        )
        for seed in seeds
    )


# ---------------------------------------------------------------------------
# Experiment drivers
# ---------------------------------------------------------------------------

@dataclass
class ExperimentResult:
    """Raw per-replicate records plus the aggregated summaries."""

    spec: ExperimentSpec
    kind: str
    records: list
    summary: dict
    oracle: dict = field(default_factory=dict)

    @property
    def failed_indices(self) -> list:
        return [i for i, r in enumerate(self.records) if not r.get("ok")]

    def to_dict(self, include_tables: bool = False) -> dict:
        records = []
        for rec in self.records:
            rec = dict(rec)
            if "entries" in rec:
                entries = []
                for e in rec["entries"]:
                    e = dict(e)
                    if not include_tables:
                        e.pop("table", None)
                    entries.append(e)
                rec["entries"] = entries
            records.append(rec)
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "config": self.spec.to_dict(),
            "summary": self.summary,
            "oracle": self.oracle,
            "failed_replicates": self.failed_indices,
            "replicates": records,
        }

    def to_json(self, include_tables: bool = False) -> str:
        return json.dumps(self.to_dict(include_tables), default=_json_default, indent=2)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _spawn_seeds(spec: ExperimentSpec):
    root = np.random.SeedSequence(spec.seed)
    cov_ss, data_ss, null_ss = root.spawn(3)
    return cov_ss, data_ss, null_ss


def _prepare_population(spec: ExperimentSpec, cov_ss):
    rng = np.random.default_rng(cov_ss)
    sigma, eigs = make_cov(spec.cov, rng)
    vals, vecs = np.linalg.eigh(sigma)
    sqrt_sigma = (vecs * np.sqrt(np.maximum(vals, 0.0))) @ vecs.T
    return sigma, sqrt_sigma, eigs


def _oracle_for_lambdas(spec: ExperimentSpec, sigma_eigs) -> dict:
    if isinstance(spec.lambdas, str):
        return {}
    gamma1 = spec.p / spec.n1
    gamma2 = spec.p / spec.n2
    out = {}
    for lam in spec.lambdas:
        out[float(lam)] = oracle_edge_params(
            sigma_eigs, float(lam), gamma1, gamma2,
            margin_frac=spec.fit.margin_frac, steps=spec.fit.ode_steps,
        )
    return out


def _size_summary(spec: ExperimentSpec, records: list) -> dict:
    """Rejection rates per (lambda, alpha) over successful replicates."""
    rates: dict = {}
    for rec in records:
        if not rec.get("ok"):
            continue
        for entry in rec["entries"]:
            key = f"{entry['lambda']:.10g}" if not isinstance(spec.lambdas, str) else spec.lambdas
            bucket = rates.setdefault(key, {str(a): [] for a in spec.alphas})
            for a in spec.alphas:
                bucket[str(a)].append(bool(entry["reject"][str(a)]))
    return {
        lam: {a: (float(np.mean(v)) if v else float("nan")) for a, v in b.items()}
        for lam, b in rates.items()
    }


def run_null_size(spec: ExperimentSpec) -> ExperimentResult:
    """Empirical size of the standardized test under the null.

    Also records, per replicate and lambda, the statistic standardized with
    the oracle (true-spectrum) parameters for distributional comparisons.
    """
    if spec.signal_zeta != 0.0:
        raise SpecValidationError("run_null_size requires signal_zeta = 0")
    cov_ss, data_ss, _ = _spawn_seeds(spec)
    sigma, sqrt_sigma, eigs = _prepare_population(spec, cov_ss)
    oracle_thetas = _oracle_for_lambdas(spec, eigs)
    seeds = data_ss.spawn(spec.replicates)
    records = _run_batch(
        spec, sqrt_sigma, sigma, eigs, 0.0, seeds, oracle_thetas, record_oracle=True
    )
    summary = {"size": _size_summary(spec, records)}
    oracle = {
        f"{lam:.10g}": {"theta1": o.theta1, "theta2": o.theta2, "rho": o.rho,
                        "beta": o.beta}
        for lam, o in oracle_thetas.items()
    }
    return ExperimentResult(
        spec=spec, kind="null_size", records=records, summary=summary, oracle=oracle
    )


_NULL_STAT_CACHE: dict = {}


def _null_statistics(spec: ExperimentSpec, sqrt_sigma, sigma, eigs, null_ss) -> dict:
    """Null statistics per lambda for size-adjusted cutoffs, cached per spec."""
    key_fields = spec.to_dict()
    for irrelevant in ("kind", "zetas", "replicates", "signal_zeta", "alphas"):
        key_fields.pop(irrelevant, None)
    cache_key = json.dumps(key_fields, sort_keys=True, default=_json_default)
    if cache_key in _NULL_STAT_CACHE:
        return _NULL_STAT_CACHE[cache_key]
    null_spec_seeds = null_ss.spawn(spec.null_replicates)
    records = _run_batch(
        spec, sqrt_sigma, sigma, eigs, 0.0, null_spec_seeds, None, record_oracle=False
    )
    stats: dict = {}
    for rec in records:
        if not rec.get("ok"):
            continue
        for entry in rec["entries"]:
            key = entry["lambda"] if not isinstance(spec.lambdas, str) else spec.lambdas
            stats.setdefault(key, []).append(entry["statistic"])
    stats = {k: np.asarray(v) for k, v in stats.items()}
    _NULL_STAT_CACHE[cache_key] = stats
    return stats


def run_power_curve(spec: ExperimentSpec, zetas=None) -> ExperimentResult:
    """Empirical power along a signal-strength grid.

    Power is reported under both the asymptotic TW cutoffs and size-adjusted
    cutoffs (quantiles of the test's own simulated null statistics).
    """
    zetas = [float(z) for z in (zetas if zetas is not None else spec.zetas)]
    if not zetas:
        raise SpecValidationError("power curve requires a nonempty zeta grid")
    cov_ss, data_ss, null_ss = _spawn_seeds(spec)
    sigma, sqrt_sigma, eigs = _prepare_population(spec, cov_ss)
    null_stats = _null_statistics(spec, sqrt_sigma, sigma, eigs, null_ss)

    all_seeds = data_ss.spawn(len(zetas) * spec.replicates)
    records = []
    for zi, zeta in enumerate(zetas):
        seeds = all_seeds[zi * spec.replicates : (zi + 1) * spec.replicates]
        records.extend(
            _run_batch(spec, sqrt_sigma, sigma, eigs, zeta, seeds, None, False)
        )

    # Summaries per (zeta, lambda, alpha).
    power_asym: dict = {}
    power_sized: dict = {}
    for rec in records:
        if not rec.get("ok"):
            continue
        zeta = rec["zeta"]
        for entry in rec["entries"]:
            lam_key = entry["lambda"] if not isinstance(spec.lambdas, str) else spec.lambdas
            for a in spec.alphas:
                k = (f"{zeta:.10g}", f"{lam_key}" if isinstance(lam_key, str) else f"{lam_key:.10g}", str(a))
                power_asym.setdefault(k, []).append(bool(entry["reject"][str(a)]))
                cutoffs = null_stats.get(lam_key)
                if cutoffs is not None and cutoffs.size:
                    cut = float(np.quantile(cutoffs, 1.0 - float(a)))
                    power_sized.setdefault(k, []).append(entry["statistic"] > cut)
    summary = {
        "power_asymptotic": {"|".join(k): float(np.mean(v)) for k, v in power_asym.items()},
        "power_size_adjusted": {"|".join(k): float(np.mean(v)) for k, v in power_sized.items()},
        "null_quantiles": {
            (f"{k}" if isinstance(k, str) else f"{k:.10g}"): {
                str(a): float(np.quantile(v, 1.0 - float(a))) for a in spec.alphas
            }
            for k, v in null_stats.items() if np.size(v)
        },
    }
    return ExperimentResult(
        spec=spec, kind="power_curve", records=records, summary=summary
    )


def run_estimation_table(spec: ExperimentSpec) -> ExperimentResult:
    """Scaled estimation-error summaries for Theta1 and Theta2.

    Per (lambda): mean and standard deviation over replicates of
    p^{2/3} |Theta_hat - Theta| / Theta2, with the oracle values computed
    from the exact population spectrum.
    """
    if spec.signal_zeta != 0.0:
        raise SpecValidationError("run_estimation_table requires signal_zeta = 0")
    if isinstance(spec.lambdas, str):
        raise SpecValidationError("estimation table requires a fixed lambda grid")
    cov_ss, data_ss, _ = _spawn_seeds(spec)
    sigma, sqrt_sigma, eigs = _prepare_population(spec, cov_ss)
    oracle_thetas = _oracle_for_lambdas(spec, eigs)
    seeds = data_ss.spawn(spec.replicates)
    records = _run_batch(
        spec, sqrt_sigma, sigma, eigs, 0.0, seeds, oracle_thetas, record_oracle=True
    )

    scale = spec.p ** (2.0 / 3.0)
    table: dict = {}
    for lam, oracle in oracle_thetas.items():
        err1, err2 = [], []
        for rec in records:
            if not rec.get("ok"):
                continue
            for entry in rec["entries"]:
                if entry["lambda"] != lam:
                    continue
                err1.append(scale * abs(entry["theta1_hat"] - oracle.theta1) / oracle.theta2)
                err2.append(scale * abs(entry["theta2_hat"] - oracle.theta2) / oracle.theta2)
        table[f"{lam:.10g}"] = {
            "theta1_scaled_error_mean": float(np.mean(err1)) if err1 else float("nan"),
            "theta1_scaled_error_sd": float(np.std(err1, ddof=1)) if len(err1) > 1 else float("nan"),
            "theta2_scaled_error_mean": float(np.mean(err2)) if err2 else float("nan"),
            "theta2_scaled_error_sd": float(np.std(err2, ddof=1)) if len(err2) > 1 else float("nan"),
            "n_effective": len(err1),
        }
    summary = {"estimation": table}
    oracle = {
        f"{lam:.10g}": {"theta1": o.theta1, "theta2": o.theta2, "rho": o.rho,
                        "beta": o.beta}
        for lam, o in oracle_thetas.items()
    }
    return ExperimentResult(
        spec=spec, kind="estimation_table", records=records, summary=summary,
        oracle=oracle,
    )


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """Dispatch on spec.kind."""
    if spec.kind == "null_size":
        return run_null_size(spec)
    if spec.kind == "power_curve":
        return run_power_curve(spec)
    return run_estimation_table(spec)
