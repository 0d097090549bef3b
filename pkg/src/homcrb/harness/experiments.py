"""Monte-Carlo experiment campaigns with deterministic CSV output.

Per-trial randomness comes from the stream (seed, m_index, trial_index),
so results are independent of the worker count and reruns are
byte-identical. Worker processes receive contiguous trial chunks and
results are merged in index order.
"""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import crb, fisher, groups, scoring
from ..exceptions import (
    ConfigError,
    CutLocusError,
    DegenerateFimError,
    DegenerateModelError,
    DivergenceError,
    DomainError,
    EvaluationError,
    LiftFailureError,
)
from ..groups import AlgebraVector
from ..homspace import coset_error
from ..models import (
    LandmarkModel,
    NetworkModel,
    SpdModel,
    load_graph,
    network_fim,
    rigidity_matrix,
)
from .config import ExperimentConfig

SCHEMA_VERSIONS = {
    "landmark": "landmark-mc-v1",
    "network": "network-mc-v1",
    "spd": "spd-mc-v1",
    "crb-report": "crb-report-v1",
}

_TRIAL_FAILURES = (
    DivergenceError,
    LiftFailureError,
    DegenerateModelError,
    CutLocusError,
    DomainError,
    EvaluationError,
)

_FIELDS = {
    "landmark": [
        "record", "m", "trial", "status",
        "coset_err_sq", "g_err_sq", "iterations", "loglik",
        "multistart_max_coset", "multistart_min_gdist",
        "n_ok", "failures",
        "coset_variance", "coset_stderr", "g_variance", "g_stderr",
        "crb_trace", "crb_trace_third", "ratio_coset", "ratio_g",
    ],
    "network": [
        "record", "m", "trial", "status",
        "coset_err_sq", "g_err_sq", "iterations", "loglik",
        "n_ok", "failures",
        "coset_variance", "coset_stderr", "g_variance", "g_stderr",
        "crb_trace", "crb_trace_third", "ratio_coset", "ratio_g",
        "fim_lambda_min", "rigidity_lambda_min_nonzero",
    ],
    "spd": [
        "record", "m", "trial", "status",
        "frobenius_gap", "iterations", "loglik",
        "n_ok", "failures", "max_gap", "mean_iterations",
    ],
    "crb-report": [
        "record", "m", "crb_trace", "crb_trace_total",
        "fim_lambda_min", "fim_lambda_max", "rigidity_lambda_min_nonzero",
    ],
}


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class MonteCarloReport:
    experiment: str
    metadata: dict
    fieldnames: list[str]
    rows: list[dict]
    summaries: list[dict]
    extras: dict = field(default_factory=dict)  # non-CSV payloads for callers

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        for key in sorted(self.metadata):
            buf.write(f"# {key}: {self.metadata[key]}\r\n")
        writer = csv.DictWriter(buf, fieldnames=self.fieldnames, lineterminator="\r\n")
        writer.writeheader()
        for row in self.rows + self.summaries:
            writer.writerow({k: _fmt(row.get(k)) for k in self.fieldnames})
        return buf.getvalue()

    def write(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv_text())

    def summary_for(self, m: int) -> dict:
        for row in self.summaries:
            if row["m"] == m:
                return row
        raise KeyError(f"no summary for m={m}")


def _base_metadata(config: ExperimentConfig) -> dict:
    return {
        "format": "homcrb-csv v1",
        "schema": SCHEMA_VERSIONS[config.experiment],
        "experiment": config.experiment,
        "config-sha256": config.config_hash(),
        "seed": config.seed,
        "n-trials": config.n_trials,
        "m-values": ",".join(str(m) for m in config.m_values),
        "workers": config.workers,
        "fim-mode": config.scoring_options().fim_mode,
    }


# ---------------------------------------------------------------------------
# Contexts (built once per process) and per-trial work


def _landmark_context(config: ExperimentConfig):
    section = config.landmark
    try:
        model = LandmarkModel(section["landmarks"], section.get("noise", 1.0))
        pose = section["true_pose"]
        axis = np.asarray(pose["rotation_axis"], dtype=float)
        axis = axis / np.linalg.norm(axis)
        coords = np.concatenate(
            [float(pose["rotation_angle"]) * axis, np.asarray(pose["translation"], float)]
        )
        g_true = groups.exp(AlgebraVector(groups.se3(), coords))
        inits = [
            groups.exp(AlgebraVector(groups.se3(), np.asarray(c, dtype=float)))
            for c in section.get("initializations", [[0.0] * 6])
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad landmark section: {exc}") from exc
    return model, g_true, inits, config.scoring_options()


def _network_context(config: ExperimentConfig):
    section = dict(config.network)
    if "graph" in section and section["graph"]:
        section.update(load_graph(section["graph"]))
    try:
        model = NetworkModel(
            section["positions"], section["edges"], section.get("sigmas", 0.1)
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad network section: {exc}") from exc
    g_true = model.reference_element()
    return model, g_true, [g_true], config.scoring_options()


def default_spd_covariance(n: int) -> np.ndarray:
    # Kac-Murdock-Szego matrix: positive definite for any n.
    idx = np.arange(n)
    return 0.5 ** np.abs(idx[:, None] - idx[None, :])


def _spd_context(config: ExperimentConfig):
    section = config.spd
    try:
        n = int(section.get("dimension", 3))
        model = SpdModel(n)
        cov = section.get("covariance")
        Sigma = default_spd_covariance(n) if cov is None else np.asarray(cov, float)
        L = np.linalg.cholesky(Sigma)
    except (KeyError, TypeError, ValueError, np.linalg.LinAlgError) as exc:
        raise ConfigError(f"bad spd section: {exc}") from exc
    g_true = groups.GroupElement(model.descriptor, L)
    return model, g_true, [groups.identity_element(model.descriptor)], config.scoring_options()


_CONTEXTS = {
    "landmark": _landmark_context,
    "network": _network_context,
    "spd": _spd_context,
}


def _estimation_trial(ctx, kind: str, seed: int, m_index: int, m: int, trial: int) -> dict:
    """One Monte-Carlo trial: sample, score, record invariant errors."""
    model, g_true, inits, opts = ctx
    rng = np.random.default_rng([seed, m_index, trial])
    row = {"record": "trial", "m": m, "trial": trial, "status": "ok"}
    try:
        if kind == "spd":
            obs = model.sample(g_true, m, rng)
            x2 = (obs.T @ obs) / m
            cond = float(np.linalg.cond(x2))
            if cond > 1e12:
                raise DegenerateFimError(
                    "rank-deficient sample second moment",
                    condition_number=cond,
                )
            trace = scoring.fisher_scoring(model, obs, inits[0], opts)
            sigma_hat = trace.final.matrix @ trace.final.matrix.T
            row.update(
                frobenius_gap=float(np.linalg.norm(sigma_hat - x2)),
                iterations=trace.iterations_used,
                loglik=trace.logliks[-1],
            )
            return row
        obs = model.sample(g_true, m, rng)
        trace = scoring.fisher_scoring(model, obs, inits[0], opts)
        est = trace.final
        ce = coset_error(g_true, est, model.struct)
        raw = (
            groups.log(g_true.inverse() @ est)
            if model.struct.side.value == "G/H"
            else groups.log(est @ g_true.inverse())
        )
        raw_coords = model.struct.coords_of(raw)
        row.update(
            coset_err_sq=float(np.sum(ce.eta_reduced**2)),
            g_err_sq=float(raw_coords @ raw_coords),
            iterations=trace.iterations_used,
            loglik=trace.logliks[-1],
            eta=tuple(float(v) for v in ce.eta_struct),
        )
        if kind == "landmark" and len(inits) > 1:
            finals = [est] + [
                scoring.fisher_scoring(model, obs, g0, opts).final for g0 in inits[1:]
            ]
            max_coset, min_gdist = 0.0, np.inf
            for i in range(len(finals)):
                for j in range(i + 1, len(finals)):
                    pair = coset_error(finals[i], finals[j], model.struct)
                    max_coset = max(max_coset, float(np.linalg.norm(pair.eta_reduced)))
                    d = groups.log(finals[j] @ finals[i].inverse())
                    min_gdist = min(min_gdist, float(np.linalg.norm(d.coords)))
            row.update(
                multistart_max_coset=max_coset, multistart_min_gdist=min_gdist
            )
        return row
    except _TRIAL_FAILURES as exc:
        return {
            "record": "trial",
            "m": m,
            "trial": trial,
            "status": f"failed:{type(exc).__name__}",
        }


def _run_chunk(kind: str, config: ExperimentConfig, pairs) -> list[dict]:
    ctx = _CONTEXTS[kind](config)
    return [
        _estimation_trial(ctx, kind, config.seed, mi, m, t) for (mi, m, t) in pairs
    ]


def _collect_rows(kind: str, config: ExperimentConfig) -> list[dict]:
    pairs = [
        (mi, m, t)
        for mi, m in enumerate(config.m_values)
        for t in range(config.n_trials)
    ]
    if config.workers == 1 or len(pairs) < 2 * config.workers:
        return _run_chunk(kind, config, pairs)
    chunks = np.array_split(np.arange(len(pairs)), config.workers)
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        futures = [
            pool.submit(_run_chunk, kind, config, [pairs[i] for i in idx])
            for idx in chunks
            if len(idx)
        ]
        out: list[dict] = []
        for fut in futures:  # submission order == index order
            out.extend(fut.result())
    return out


def _error_summary(rows_m, m: int, bound_per_m: float, fim_total, struct):
    ok = [r for r in rows_m if r["status"] == "ok"]
    failures = len(rows_m) - len(ok)
    summary = {
        "record": "summary",
        "m": m,
        "status": "",
        "n_ok": len(ok),
        "failures": failures,
    }
    if not ok:
        return summary
    cvals = np.array([r["coset_err_sq"] for r in ok])
    gvals = np.array([r["g_err_sq"] for r in ok])
    etas = np.array([r["eta"] for r in ok])
    delta = crb.delta_matrix(etas, struct)
    third = crb.crb_third_order(fim_total, delta).bound_trace
    summary.update(
        coset_variance=float(cvals.mean()),
        coset_stderr=float(cvals.std() / np.sqrt(len(cvals))),
        g_variance=float(gvals.mean()),
        g_stderr=float(gvals.std() / np.sqrt(len(gvals))),
        crb_trace=bound_per_m,
        crb_trace_third=third,
        ratio_coset=float(cvals.mean() / bound_per_m),
        ratio_g=float(gvals.mean() / bound_per_m),
    )
    return summary


def _strip_private(rows) -> list[dict]:
    return [{k: v for k, v in r.items() if k != "eta"} for r in rows]


def run_landmark_experiment(config: ExperimentConfig) -> MonteCarloReport:
    """Pose-estimation campaign: scoring-based MLE errors against the
    analytic CRB for each measurement count."""
    started = time.monotonic()
    model, g_true, _, _ = _landmark_context(config)
    rows = _collect_rows("landmark", config)
    F1 = fisher.fim(model, g_true, fisher.REDUCED)
    summaries = []
    for m in config.m_values:
        rows_m = [r for r in rows if r["m"] == m]
        Fm = fisher.FimMatrix(fisher.REDUCED, g_true, m * F1.matrix, fisher.ANALYTIC, 0)
        summaries.append(
            _error_summary(rows_m, m, crb.variance_bound(F1) / m, Fm, model.struct)
        )
    meta = _base_metadata(config)
    meta["noise"] = config.landmark.get("noise", 1.0)
    report = MonteCarloReport(
        "landmark", meta, _FIELDS["landmark"], _strip_private(rows), summaries
    )
    report.extras["etas"] = {
        m: [r["eta"] for r in rows if r["m"] == m and r["status"] == "ok"]
        for m in config.m_values
    }
    report.extras["runtime_seconds"] = time.monotonic() - started
    return report


def run_network_experiment(config: ExperimentConfig) -> MonteCarloReport:
    """Localization campaign on H\\SE(2)^V; refuses non-rigid graphs and
    reports the rigidity spectrum."""
    model, g_true, _, _ = _network_context(config)
    # Raises DegenerateModelError with the rank gap on flex graphs.
    F_rigidity = network_fim(model.positions, model.edges, model.sigmas)
    S_full = rigidity_matrix(model.positions, model.edges, model.sigmas)
    spectrum = np.linalg.eigvalsh(S_full)
    lam_min_fim = float(np.linalg.eigvalsh(F_rigidity.matrix).min())
    nonzero = spectrum[spectrum > 1e-10 * max(spectrum.max(initial=0.0), 1.0)]
    lam_min_nonzero = float(nonzero.min()) if len(nonzero) else 0.0

    rows = _collect_rows("network", config)
    F1 = fisher.fim(model, g_true, fisher.REDUCED)
    summaries = []
    for m in config.m_values:
        rows_m = [r for r in rows if r["m"] == m]
        Fm = fisher.FimMatrix(fisher.REDUCED, g_true, m * F1.matrix, fisher.ANALYTIC, 0)
        s = _error_summary(rows_m, m, crb.variance_bound(F1) / m, Fm, model.struct)
        s.update(
            fim_lambda_min=lam_min_fim, rigidity_lambda_min_nonzero=lam_min_nonzero
        )
        summaries.append(s)
    meta = _base_metadata(config)
    meta["rigidity-spectrum"] = ",".join(repr(float(v)) for v in spectrum)
    report = MonteCarloReport(
        "network", meta, _FIELDS["network"], _strip_private(rows), summaries
    )
    report.extras["rigidity_spectrum"] = spectrum
    return report


def run_spd_experiment(config: ExperimentConfig) -> MonteCarloReport:
    """Covariance-estimation campaign: Fisher scoring from the identity
    against the closed-form second-moment MLE."""
    rows = _collect_rows("spd", config)
    summaries = []
    for m in config.m_values:
        rows_m = [r for r in rows if r["m"] == m]
        ok = [r for r in rows_m if r["status"] == "ok"]
        summary = {
            "record": "summary",
            "m": m,
            "status": "",
            "n_ok": len(ok),
            "failures": len(rows_m) - len(ok),
        }
        if ok:
            summary.update(
                max_gap=float(max(r["frobenius_gap"] for r in ok)),
                mean_iterations=float(np.mean([r["iterations"] for r in ok])),
            )
        summaries.append(summary)
    meta = _base_metadata(config)
    meta["dimension"] = config.spd.get("dimension", 3)
    return MonteCarloReport("spd", meta, _FIELDS["spd"], rows, summaries)


def run_crb_report(config: ExperimentConfig) -> MonteCarloReport:
    """Analytic CRB traces and FIM spectra for the configured model."""
    ctx = _CONTEXTS[config.model](config)
    model, g_true = ctx[0], ctx[1]
    F1 = fisher.fim(model, g_true, fisher.REDUCED)
    eigs = np.linalg.eigvalsh(F1.matrix)
    tr_inv = crb.variance_bound(F1)
    rows = []
    lam_rig = None
    if config.model == "network":
        S = rigidity_matrix(model.positions, model.edges, model.sigmas)
        sp = np.linalg.eigvalsh(S)
        nz = sp[sp > 1e-10 * max(sp.max(initial=0.0), 1.0)]
        lam_rig = float(nz.min()) if len(nz) else 0.0
    for m in config.m_values:
        rows.append(
            {
                "record": "crb",
                "m": m,
                "crb_trace": tr_inv / m,
                "crb_trace_total": tr_inv,
                "fim_lambda_min": float(eigs.min()),
                "fim_lambda_max": float(eigs.max()),
                "rigidity_lambda_min_nonzero": lam_rig,
            }
        )
    meta = _base_metadata(config)
    meta["model"] = config.model
    return MonteCarloReport("crb-report", meta, _FIELDS["crb-report"], rows, [])
