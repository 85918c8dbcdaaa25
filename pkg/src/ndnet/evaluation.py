"""Metrics, noise robustness sweeps, coefficient analysis and grad checks.

Everything reported here is deterministic given the seeds carried in the
inputs and re-uses one fixed noise realization per (seed, eta), so
architecture comparisons at a given noise level are paired.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import data as data_mod
from . import network as net
from .ndlayer import (
    NdParams,
    PairIndexer,
    attention_gate,
    nd_backward,
    nd_backward_signed,
    nd_backward_softplus,
    nd_forward,
    nd_forward_signed,
    nd_forward_softplus,
)
from .ndmath import softplus

__all__ = [
    "EvalReport",
    "CrossvalResult",
    "CoeffRatioMatrix",
    "GradcheckReport",
    "accuracy",
    "efficiency",
    "noise_sweep",
    "coeff_ratios",
    "top_asymmetric",
    "gradcheck",
    "run_crossval",
    "attach_noise_sweep",
    "fold_test_split",
    "report_to_dict",
    "report_to_text",
    "history_csv_rows",
    "sweep_csv_rows",
    "GRADCHECK_TARGETS",
]


# ---------------------------------------------------------------------------
# basic metrics


def accuracy(model: net.Model, dataset) -> float:
    """Fraction of samples whose thresholded logit matches the label.

    sigmoid(logit) > 0.5 predicts class 1; the exact tie predicts class 0.
    Datasets containing negative values (noise-perturbed inputs) are
    routed through the signed-tolerant forward automatically.
    """
    if dataset.n_samples == 0:
        raise ValueError("dataset is empty")
    _check_bands(model, dataset)
    signed = bool((dataset.X < 0).any())
    logits, _ = net.model_forward(model, dataset.X, signed=signed)
    return net.accuracy_from_logits(logits, dataset.y)


def _check_bands(model: net.Model, dataset):
    if dataset.n_bands != model.n_bands:
        raise ValueError(
            f"model expects {model.n_bands} bands, dataset has "
            f"{dataset.n_bands}"
        )
    if list(dataset.band_names) != list(model.band_names):
        raise ValueError(
            f"band names disagree: model {model.band_names}, dataset "
            f"{list(dataset.band_names)}"
        )


def efficiency(accuracy_pct: float, n_params: int) -> float:
    """Accuracy percentage points per 100 parameters."""
    if n_params <= 0:
        raise ValueError("parameter count must be positive")
    return accuracy_pct / n_params * 100.0


# ---------------------------------------------------------------------------
# noise sweep


def _noise_seed(seed: int, eta: float) -> int:
    """One fixed noise realization per (seed, eta) pair."""
    eta_bits = int(np.float64(eta).view(np.uint64))
    return int(np.random.SeedSequence([int(seed), eta_bits]).generate_state(1)[0])


def noise_sweep(model: net.Model, test_set, etas, seed: int):
    """Accuracy per noise level; returns a list parallel to ``etas``.

    Noise realizations are fixed per (seed, eta), so every model swept
    with the same arguments sees identical perturbed inputs. The eta = 0
    entry is the clean accuracy, bit for bit.
    """
    etas = [float(e) for e in etas]
    if any(not (0 <= e <= 0.5) for e in etas):
        raise ValueError("etas must lie within [0, 0.5]")
    if etas != sorted(etas):
        raise ValueError("etas must be sorted ascending")
    out = []
    for eta in etas:
        noisy = data_mod.inject_noise(test_set, eta, _noise_seed(seed, eta))
        out.append(accuracy(model, noisy))
    return out


# ---------------------------------------------------------------------------
# coefficient interpretability


@dataclass
class CoeffRatioMatrix:
    """Pairwise learned-asymmetry ratios softplus(alpha)/softplus(beta).

    Entry (i, j) with i < j holds the pair's ratio; (j, i) holds the
    reciprocal and the diagonal is 1.
    """

    band_names: list
    matrix: np.ndarray

    @property
    def n_bands(self) -> int:
        return len(self.band_names)

    def ratio(self, i: int, j: int) -> float:
        return float(self.matrix[i, j])


def coeff_ratios(model: net.Model) -> CoeffRatioMatrix:
    """Ratio matrix of a model whose first layer is pairwise-normalized."""
    if model.nd_params is None:
        raise ValueError(
            f"architecture {model.arch!r} has no coupling coefficients"
        )
    indexer = model.indexer
    ratios = softplus(model.nd_params.alpha) / softplus(model.nd_params.beta)
    n = model.n_bands
    matrix = np.ones((n, n))
    matrix[indexer.i_idx, indexer.j_idx] = ratios
    matrix[indexer.j_idx, indexer.i_idx] = 1.0 / ratios
    return CoeffRatioMatrix(list(model.band_names), matrix)


def top_asymmetric(ratio_matrix: CoeffRatioMatrix, k: int):
    """The k band pairs deviating most from the symmetric 1:1 weighting.

    Asymmetry of a pair is max(ratio, 1/ratio); ties keep lexicographic
    pair order. k larger than the pair count returns every pair.
    """
    indexer = PairIndexer(ratio_matrix.n_bands)
    entries = []
    for i, j in indexer.pairs:
        ratio = ratio_matrix.ratio(i, j)
        entries.append({
            "i": i,
            "j": j,
            "band_i": ratio_matrix.band_names[i],
            "band_j": ratio_matrix.band_names[j],
            "ratio": ratio,
            "asymmetry": max(ratio, 1.0 / ratio),
        })
    entries.sort(key=lambda e: -e["asymmetry"])  # stable: ties keep pair order
    return entries[: max(0, min(k, len(entries)))]


# ---------------------------------------------------------------------------
# gradient checking

GRADCHECK_TARGETS = ("nd", "mlp", "attnd", "ndlayer", "ndlayer-signed",
                     "ndlayer-softplus")

FD_STEP = 1e-5
# Central differences are only trustworthy where the third derivative is
# moderate. The smooth-absolute-value denominator has a high-curvature
# ridge of width ~sqrt(eps) around zero (third derivative peaks near
# 0.7/eps there), and ReLU units have a kink at zero, so sampling keeps
# a margin away from both.
RELU_KINK_MARGIN = 1e-3


def _signed_input_margin(eps: float) -> float:
    return max(5e-3, 2.0 * np.sqrt(eps))
# Gradients this small sit at the roundoff floor of a step-1e-5 central
# difference (|f| ~ 1 gives ~5e-12 of noise), e.g. at saturated outputs
# where the true derivative is O(eps). Such coordinates are compared
# against this scale instead of their own magnitude.
GRAD_ABS_FLOOR = 1e-5


@dataclass
class GradcheckReport:
    target: str
    depth: int | None
    trials: int
    tolerance: float
    eps: float
    max_errors: dict  # family -> worst relative error observed
    passed: bool
    runtime_s: float

    def worst(self) -> float:
        return max(self.max_errors.values()) if self.max_errors else 0.0


def _rel_err(analytic: float, numeric: float) -> float:
    scale = max(abs(analytic), abs(numeric), GRAD_ABS_FLOOR)
    return abs(analytic - numeric) / scale


def _central_diff(fn, array, flat_index, h=FD_STEP):
    orig = array.flat[flat_index]
    array.flat[flat_index] = orig + h
    f_plus = fn()
    array.flat[flat_index] = orig - h
    f_minus = fn()
    array.flat[flat_index] = orig
    return (f_plus - f_minus) / (2.0 * h)


_LAYER_VARIANTS = {
    "ndlayer": (nd_forward, nd_backward, False),
    "ndlayer-signed": (nd_forward_signed, nd_backward_signed, True),
    "ndlayer-softplus": (nd_forward_softplus, nd_backward_softplus, True),
}


def _gradcheck_layer(target, trials, tol, seed, eps):
    forward, backward, signed = _LAYER_VARIANTS[target]
    rng = np.random.default_rng(seed)
    worst = {"alpha": 0.0, "beta": 0.0, "input": 0.0}
    for _ in range(trials):
        n = int(rng.integers(2, 7))
        if signed:
            bands = rng.uniform(-1.0, 1.0, size=n)
            if target == "ndlayer-signed":
                margin = _signed_input_margin(eps)
                small = np.abs(bands) < margin
                bands[small] = np.where(bands[small] >= 0, margin, -margin)
        else:
            bands = rng.uniform(0.01, 1.0, size=n)
        indexer = PairIndexer(n)
        params = NdParams(rng.uniform(-2.0, 2.0, size=indexer.n_pairs),
                          rng.uniform(-2.0, 2.0, size=indexer.n_pairs))
        delta = rng.uniform(-1.0, 1.0, size=indexer.n_pairs)

        _, cache = forward(bands, params, eps, indexer)
        grads = backward(cache, delta, params, eps)

        def objective():
            out, _ = forward(bands, params, eps, indexer)
            return float(delta @ out)

        for family, analytic, array in (("alpha", grads.d_alpha, params.alpha),
                                        ("beta", grads.d_beta, params.beta),
                                        ("input", grads.d_input, bands)):
            for k in range(array.size):
                numeric = _central_diff(objective, array, k)
                err = _rel_err(float(analytic.flat[k]), numeric)
                if err > worst[family]:
                    worst[family] = err
    return worst


def _random_model(arch, depth, n_bands, rng, eps):
    model = net.build_model(arch, depth, n_bands, seed=int(rng.integers(2 ** 31)),
                            eps=eps)
    if model.nd_params is not None:
        model.nd_params.alpha[:] = rng.uniform(-1.0, 1.0, model.nd_params.alpha.shape)
        model.nd_params.beta[:] = rng.uniform(-1.0, 1.0, model.nd_params.beta.shape)
    if model.attn_weights is not None:
        model.attn_weights[:] = rng.uniform(-0.5, 0.5, model.attn_weights.shape)
        model.attn_bias[:] = rng.uniform(-0.5, 0.5, model.attn_bias.shape)
    return model


def _relu_margins_ok(model, bands):
    """FD perturbations must not cross a ReLU kink mid-check."""
    x = bands[None, :]
    if model.arch in ("nd", "attnd"):
        x, _ = nd_forward(x, model.nd_params, model.eps, model.indexer)
        if model.arch == "attnd":
            x, _ = attention_gate(bands[None, :], model.attn_weights,
                                  model.attn_bias, x)
    for layer in model.layers:
        pre = x @ layer.weights.T + layer.bias
        if layer.activation == "relu":
            if np.abs(pre).min() < RELU_KINK_MARGIN:
                return False
            x = np.maximum(pre, 0.0)
        else:
            x = pre
    return True


def _gradcheck_model(arch, depth, trials, tol, seed, eps, max_coords):
    rng = np.random.default_rng(seed)
    worst = {}
    for _ in range(trials):
        for _attempt in range(200):
            model = _random_model(arch, depth, 10, rng, eps)
            bands = rng.uniform(0.01, 1.0, size=10)
            if _relu_margins_ok(model, bands):
                break
        else:
            raise RuntimeError("could not sample a kink-free configuration")

        _, cache = net.model_forward(model, bands)
        grads, d_bands = net.model_backward(model, cache, 1.0)

        def objective():
            logit, _ = net.model_forward(model, bands)
            return logit

        named = list(zip(model.parameter_names(), model.parameters(), grads))
        named.append(("input", bands, d_bands))
        for name, array, analytic in named:
            family = _param_family(name)
            coords = np.arange(array.size)
            if max_coords is not None and array.size > max_coords:
                coords = rng.choice(array.size, size=max_coords, replace=False)
            for k in coords:
                numeric = _central_diff(objective, array, int(k))
                err = _rel_err(float(np.asarray(analytic).flat[int(k)]), numeric)
                if err > worst.get(family, 0.0):
                    worst[family] = err
    expected = ["dense", "input"]
    if arch in ("nd", "attnd"):
        expected += ["alpha", "beta"]
    if arch == "attnd":
        expected.append("attention")
    for family in expected:
        worst.setdefault(family, 0.0)
    return worst


def _param_family(name: str) -> str:
    if name == "input":
        return "input"
    if name.startswith("nd.alpha"):
        return "alpha"
    if name.startswith("nd.beta"):
        return "beta"
    if name.startswith("attn."):
        return "attention"
    return "dense"


def gradcheck(target: str, depth: int = 3, trials: int = 100,
              tolerance: float = 1e-5, seed: int = 0, eps: float = 1e-8,
              max_coords: int | None = 40) -> GradcheckReport:
    """Compare analytic gradients with central finite differences.

    ``target`` is one of GRADCHECK_TARGETS: the three whole architectures
    (checked end to end on the logit) or the bare pairwise layer in its
    three variants (checked on a random linear functional of the
    outputs). ``max_coords`` caps the coordinates checked per parameter
    family per trial for the large whole-model targets; ``None`` checks
    every coordinate.
    """
    if target not in GRADCHECK_TARGETS:
        raise ValueError(f"unknown gradcheck target {target!r}")
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    start = time.perf_counter()
    if target in _LAYER_VARIANTS:
        worst = _gradcheck_layer(target, trials, tolerance, seed, eps)
        report_depth = None
    else:
        worst = _gradcheck_model(target, depth, trials, tolerance, seed, eps,
                                 max_coords)
        report_depth = depth
    runtime = time.perf_counter() - start
    passed = all(err < tolerance for err in worst.values())
    return GradcheckReport(target=target, depth=report_depth, trials=trials,
                           tolerance=tolerance, eps=eps, max_errors=worst,
                           passed=passed, runtime_s=runtime)


# ---------------------------------------------------------------------------
# cross-validation


@dataclass
class EvalReport:
    arch: str
    depth: int
    seed: int
    n_folds: int
    n_params: int
    fold_accuracies: list
    mean_accuracy: float
    std_accuracy: float
    efficiency: float
    noise_etas: list | None = None
    noise_fold_accuracies: list | None = None  # [fold][eta]
    noise_mean_accuracies: list | None = None
    degradation: float | None = None


@dataclass
class CrossvalResult:
    report: EvalReport
    models: list
    histories: list
    split: data_mod.SplitSpec


def _fold_seed(base_seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([int(base_seed), int(fold)])
               .generate_state(1)[0])


def crossval_fold(arch: str, depth: int, dataset, config: net.TrainConfig,
                  split: data_mod.SplitSpec, fold: int):
    """Train and test one fold; returns (fold, test_accuracy, model, history)."""
    train_set, val_set, test_set = data_mod.stratified_split(dataset, split, fold)
    seed = _fold_seed(config.seed, fold)
    model = net.build_model(arch, depth, dataset.n_bands, seed=seed,
                            eps=config.eps, band_names=dataset.band_names)
    fold_config = replace(config, seed=seed)
    model, history = net.train(model, train_set, val_set, fold_config)
    return fold, accuracy(model, test_set), model, history


def run_crossval(arch: str, depth: int, dataset, config: net.TrainConfig,
                 n_folds: int = 10, fold_runner=None) -> CrossvalResult:
    """Stratified k-fold cross-validation of one architecture/depth.

    Each fold trains on its 70% with early stopping on its 20% and is
    scored on its held-out 10%. Per-fold model seeds derive from
    config.seed and the fold index, so reports are bit-reproducible.
    ``fold_runner`` may map ``crossval_fold`` arguments in parallel; fold
    results are assembled by index either way.
    """
    split = data_mod.SplitSpec(n_folds=n_folds, seed=config.seed)
    args = [(arch, depth, dataset, config, split, fold)
            for fold in range(n_folds)]
    if fold_runner is None:
        outcomes = [crossval_fold(*a) for a in args]
    else:
        outcomes = list(fold_runner(args))
    outcomes.sort(key=lambda item: item[0])

    accs = [acc for _, acc, _, _ in outcomes]
    models = [m for _, _, m, _ in outcomes]
    histories = [h for _, _, _, h in outcomes]
    n_params = net.count_params(models[0])
    mean_acc = float(np.mean(accs))
    report = EvalReport(
        arch=arch,
        depth=depth,
        seed=config.seed,
        n_folds=n_folds,
        n_params=n_params,
        fold_accuracies=[float(a) for a in accs],
        mean_accuracy=mean_acc,
        std_accuracy=float(np.std(accs, ddof=1)),
        efficiency=efficiency(100.0 * mean_acc, n_params),
    )
    return CrossvalResult(report, models, histories, split)


def fold_test_split(dataset, split: data_mod.SplitSpec, fold: int):
    """The held-out test part of one fold."""
    _, _, test_set = data_mod.stratified_split(dataset, split, fold)
    return test_set


def attach_noise_sweep(result: CrossvalResult, dataset, etas, seed: int
                       ) -> EvalReport:
    """Sweep every fold's model over noise levels and fill the report.

    Uses the same (seed, eta)-keyed realizations for every fold's test
    set, so sweeps of different architectures over the same data are
    paired. Degradation is the mean clean-accuracy drop from eta = 0 to
    eta = 0.10 when both levels are present.
    """
    etas = [float(e) for e in etas]
    per_fold = []
    for fold, model in enumerate(result.models):
        test_set = fold_test_split(dataset, result.split, fold)
        per_fold.append(noise_sweep(model, test_set, etas, seed))
    mean_accs = [float(np.mean([fa[k] for fa in per_fold]))
                 for k in range(len(etas))]
    report = result.report
    report.noise_etas = etas
    report.noise_fold_accuracies = [[float(a) for a in fa] for fa in per_fold]
    report.noise_mean_accuracies = mean_accs
    if 0.0 in etas and 0.10 in etas:
        report.degradation = (mean_accs[etas.index(0.0)]
                              - mean_accs[etas.index(0.10)])
    return report


# ---------------------------------------------------------------------------
# report serialization


def report_to_dict(report: EvalReport) -> dict:
    return asdict(report)


def report_to_text(report: EvalReport) -> str:
    lines = [
        f"architecture : {report.arch}",
        f"depth        : {report.depth}",
        f"folds        : {report.n_folds}",
        f"seed         : {report.seed}",
        f"parameters   : {report.n_params}",
        f"efficiency   : {report.efficiency:.2f} (accuracy % per 100 params)",
        "",
        "fold   test accuracy",
    ]
    for fold, acc in enumerate(report.fold_accuracies):
        lines.append(f"{fold:4d}   {acc:.4f}")
    lines.append("")
    lines.append(f"mean +/- std : {report.mean_accuracy:.4f} +/- "
                 f"{report.std_accuracy:.4f}")
    if report.noise_etas:
        lines.append("")
        lines.append("eta     mean accuracy")
        for eta, acc in zip(report.noise_etas, report.noise_mean_accuracies):
            lines.append(f"{eta:.2f}    {acc:.4f}")
        if report.degradation is not None:
            lines.append("")
            lines.append(f"degradation (0 -> 0.10): {report.degradation:.4f}")
    return "\n".join(lines) + "\n"


def history_csv_rows(histories, arch: str, depth: int, metric: str):
    """Rows (epoch, value, fold, arch, depth) for one history metric."""
    rows = []
    for fold, history in enumerate(histories):
        series = getattr(history, metric)
        for epoch, value in enumerate(series, start=1):
            rows.append((epoch, value, fold, arch, depth))
    return rows


def sweep_csv_rows(report: EvalReport):
    """Rows (eta, value, fold, arch, depth) for the noise sweep."""
    if not report.noise_etas:
        return []
    rows = []
    for fold, accs in enumerate(report.noise_fold_accuracies):
        for eta, value in zip(report.noise_etas, accs):
            rows.append((eta, value, fold, report.arch, report.depth))
    return rows
