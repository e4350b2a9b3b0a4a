"""Monte Carlo tomography experiments.

Every run draws its model (true state, channel or POVM) from a stream
derived from ``seed`` and gives each trial its own spawned stream, so a
config reproduces bit-identical estimates regardless of trial order.

Three tasks are supported:

``state``
    IC POVM on a qudit, estimates of ``Tr[rho X]`` for an orthonormal
    Hermitian basis of traceless observables, optional depolarizing noise
    on the detector.
``process``
    Two-Bell-measurement scheme with ancillas in ``|Psi>>``: each shot
    draws fresh ``(U, V)`` from a design (or Haar), measures the resulting
    discrete POVM and uses the covariant optimal coefficients.
``povm``
    Unknown POVM probed through half of a maximally entangled pair, with an
    IC measurement on the other half.
"""
from __future__ import annotations

import csv
import json
import math
import time
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .combs import Tester, tester_probabilities
from .designs import clifford_group
from .devices import (depolarizing_channel, is_faithful, max_entangled_state, povm_tomography, random_channel,
                      random_unital_channel)
from .frames import (Povm, canonical_dual, elements_of, mub_povm, pauli_povm, povm_from_dict, random_ic_povm,
                     standard_ic_povm)
from .linalg import haar_random_unitary, hermitian_basis, moore_penrose, projector, random_density, random_pure_state
from .optimal import _BLOCKS, SubspaceKind, bell_scheme_povm, covariant_Y_from_seeds, eta_schur, optimal_seed
from .processing import (Ensemble, heisenberg_map, max_likelihood, optimal_dual, probabilities, statistical_error,
                         unbias_noise)

SCHEMA = 1
TASKS = ("state", "process", "povm")


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce a run.

    ``shots=None`` is exact mode: frequencies equal probabilities.
    ``model`` selects the true object: ``"random"`` (mixed state / channel /
    random IC POVM), ``"pure"`` (state task), ``"pauli6"`` (POVM task) or
    ``"unital"`` (process task).  ``prior`` is the ensemble average used by
    the optimal dual: ``"uniform"`` (``I/d``) or ``"skewed"``.
    """

    task: str = "state"
    d: int = 2
    shots: int | None = 10_000
    trials: int = 100
    model: str = "random"
    povm: str = "pauli6"
    dual: str = "optimal"
    prior: str = "uniform"
    noise: float = 0.0
    kind: str = "unital"
    design: str = "clifford"
    seed: int = 0
    out: str | None = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.d < 2:
            raise ValueError("d must be at least 2")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be positive (or None for exact mode)")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if self.dual not in ("canonical", "optimal", "maxlik"):
            raise ValueError(f"unknown dual {self.dual!r}")
        if not 0 <= self.noise <= 1:
            raise ValueError("noise parameter must lie in [0, 1]")
        if self.task == "process" and self.dual == "maxlik":
            raise ValueError("the process task uses the covariant optimal coefficients only")
        SubspaceKind(self.kind)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**data)


@dataclass
class ExperimentRecord:
    config: dict
    observables: list
    truth: np.ndarray
    estimates: np.ndarray          # (trials, n_observables) complex
    analytic: np.ndarray | None    # predicted per-observable MSE at this N
    extra: dict = field(default_factory=dict)
    wall_clock: float = 0.0
    schema: int = SCHEMA

    @property
    def sq_errors(self) -> np.ndarray:
        return np.abs(self.estimates - self.truth) ** 2

    @property
    def mean(self) -> np.ndarray:
        return self.estimates.mean(axis=0)

    @property
    def variance(self) -> np.ndarray:
        return self.estimates.var(axis=0, ddof=1) if len(self.estimates) > 1 else np.zeros(self.estimates.shape[1])

    @property
    def mse(self) -> np.ndarray:
        return np.array([math.fsum(col) / len(col) for col in self.sq_errors.T])

    @property
    def ratio(self) -> float | None:
        if self.analytic is None:
            return None
        total = math.fsum(self.analytic)
        return math.fsum(self.mse) / total if total > 0 else None

    def bias_z(self) -> np.ndarray | None:
        """``|mean - truth|`` in units of the predicted standard error of the mean."""
        if self.analytic is None:
            return None
        se = np.sqrt(self.analytic / len(self.estimates))
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(se > 0, np.abs(self.mean - self.truth) / se, 0.0)

    def summary(self) -> dict:
        out = {"mse": self.mse.tolist(),
               "mean_re": self.mean.real.tolist(), "mean_im": self.mean.imag.tolist(),
               "variance": self.variance.tolist(),
               "truth_re": self.truth.real.tolist(), "truth_im": self.truth.imag.tolist(),
               "analytic": None if self.analytic is None else self.analytic.tolist(),
               "ratio": self.ratio}
        out.update(self.extra)
        return out


# ---------------------------------------------------------------------------
# sampling

def sample_counts(P, model, N: int, rng=None) -> np.ndarray:
    """Multinomial counts of ``N`` shots for a POVM (``model`` a state) or a
    :class:`Tester` (``model`` a Choi operator)."""
    rng = np.random.default_rng(rng)
    if isinstance(P, Tester):
        p = tester_probabilities(P, model)
    else:
        p = probabilities(P, model)
    if np.any(p < -1e-9) or abs(p.sum() - 1) > 1e-8:
        raise ValueError("model does not give a valid probability distribution")
    p = np.clip(p, 0, None)
    return rng.multinomial(N, p / p.sum())


def _streams(cfg: ExperimentConfig):
    root = np.random.SeedSequence(cfg.seed)
    model_ss, trial_ss = root.spawn(2)
    return np.random.default_rng(model_ss), [np.random.default_rng(s) for s in trial_ss.spawn(cfg.trials)]


def _prior(cfg: ExperimentConfig) -> np.ndarray:
    d = cfg.d
    if cfg.prior == "uniform":
        return np.eye(d, dtype=complex) / d
    if cfg.prior == "skewed":
        w = 0.5 ** np.arange(d)
        return np.diag(w / w.sum()).astype(complex)
    raise ValueError(f"unknown prior {cfg.prior!r}")


def load_povm_spec(spec: str, d: int) -> Povm:
    if spec == "pauli6":
        if d != 2:
            raise ValueError("pauli6 is a qubit POVM")
        return pauli_povm()
    if spec == "covariant":
        return mub_povm(d) if d != 2 else pauli_povm()
    if spec == "standard":
        return standard_ic_povm(d)
    if spec.startswith("file:"):
        P = povm_from_dict(json.loads(Path(spec[5:]).read_text()))
        if P.dim != d:
            raise ValueError(f"POVM file has dimension {P.dim}, expected {d}")
        return P
    raise ValueError(f"unknown POVM spec {spec!r}")


def _frequencies(p: np.ndarray, shots: int | None, rng) -> np.ndarray:
    p = np.clip(p, 0, None)
    p = p / p.sum()
    return p if shots is None else rng.multinomial(shots, p) / shots


# ---------------------------------------------------------------------------
# tasks

def _run_state(cfg, model_rng, trial_rngs):
    d = cfg.d
    if cfg.model == "pure":
        rho = projector(random_pure_state(d, model_rng))
    elif cfg.model == "random":
        rho = random_density(d, model_rng)
    elif cfg.model == "mixed":
        rho = np.eye(d, dtype=complex) / d
    else:
        raise ValueError(f"unknown state model {cfg.model!r}")
    P = load_povm_spec(cfg.povm, d)
    physical = P
    X = hermitian_basis(d)[1:] * np.sqrt(2)    # Paulis for d = 2
    labels = [f"X{k}" for k in range(len(X))]
    truth = np.einsum("kij,ji->k", X, rho)
    noise = depolarizing_channel(cfg.noise, d).R if cfg.noise else None
    if noise is not None:
        physical = Povm(heisenberg_map(noise, P))
    p = probabilities(physical, rho)

    if cfg.dual == "maxlik":
        est = np.zeros((cfg.trials, len(X)), dtype=complex)
        for t, rng in enumerate(trial_rngs):
            nu = _frequencies(p, cfg.shots, rng)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                r = max_likelihood(physical, nu).rho
            est[t] = np.einsum("kij,ji->k", X, r)
        return labels, truth, est, None, {}

    Q = canonical_dual(P) if cfg.dual == "canonical" else optimal_dual(P, _prior(cfg))
    if noise is not None:
        Q = unbias_noise(Q, noise)
    F = np.einsum("lij,kij->kl", Q.elements.conj(), X)          # f_l[X_k]
    est = np.array([F @ _frequencies(p, cfg.shots, rng) for rng in trial_rngs])
    if cfg.shots is None:
        analytic = np.zeros(len(X))
    else:
        analytic = ((np.abs(F) ** 2) @ p - np.abs(truth) ** 2) / cfg.shots
    return labels, truth, est, analytic, {}


def process_observables(kind, d: int) -> np.ndarray:
    """Orthonormal Hermitian basis of the operator subspace of ``kind``,
    built from products of single-system basis elements."""
    B = hermitian_basis(d)
    g = _BLOCKS[SubspaceKind(kind)]
    out = []
    for a in range(d * d):
        for b in range(d * d):
            block = 1 + (a > 0) + 2 * (b > 0)     # (0,0)->P1, (a,0)->P2, (0,b)->P3, (a,b)->P4
            if g[block - 1]:
                out.append(np.kron(B[a], B[b]))
    return np.array(out)


def _run_process(cfg, model_rng, trial_rngs):
    d = cfg.d
    kind = SubspaceKind(cfg.kind)
    if cfg.model == "unital" or (cfg.model == "random" and kind is SubspaceKind.UNITAL):
        R = random_unital_channel(d, rng=model_rng)
    elif cfg.model == "random":
        R = random_channel(d, rng=model_rng)
    else:
        raise ValueError(f"unknown channel model {cfg.model!r}")
    seed = optimal_seed(kind, d)
    coeffs = covariant_Y_from_seeds(seed)
    Yp = moore_penrose(coeffs.operator(), 1e-10)
    X = process_observables(kind, d)
    labels = [f"B{k}" for k in range(len(X))]
    truth = np.einsum("kij,ji->k", X, R.R)
    YX = (Yp @ X.reshape(len(X), -1).T)                     # columns Y^+ |X_k>>

    E0 = bell_scheme_povm(seed.Psi)

    def shot_tables(U, V):
        """Probabilities (n, d^4) and coefficients (n, d^4, K) for unitary pairs."""
        W = np.einsum("nab,ncd->nacbd", U, V).reshape(len(U), d * d, d * d)
        E = np.einsum("nji,ojl,nlm->noim", W.conj(), E0, W, optimize=True)
        Pi = E / d
        p = np.einsum("noij,ji->no", Pi, R.R).real
        w = np.einsum("noii->no", Pi).real / d                 # Tr[R_E Pi], R_E = I (x) I / d
        f = np.einsum("noi,ik->nok", Pi.reshape(*Pi.shape[:2], -1).conj(), YX) / w[..., None]
        return p, f

    n_out = d ** 4
    if cfg.design == "clifford":
        G = clifford_group(d)
        idx = np.array([(g, h) for g in range(len(G)) for h in range(len(G))])
        ptab, ftab = shot_tables(G[idx[:, 0]], G[idx[:, 1]])
    elif cfg.design != "haar":
        raise ValueError(f"unknown design {cfg.design!r}")

    est = np.zeros((cfg.trials, len(X)), dtype=complex)
    for t, rng in enumerate(trial_rngs):
        if cfg.shots is None:
            if cfg.design != "clifford":
                raise ValueError("exact mode needs a finite design")
            est[t] = np.einsum("no,nok->k", ptab, ftab) / len(ptab)
            continue
        if cfg.design == "clifford":
            pairs = rng.integers(len(ptab), size=cfg.shots)
            p_shot, f_all = ptab[pairs], ftab[pairs]
        else:
            U = haar_random_unitary(d, rng, size=cfg.shots)
            V = haar_random_unitary(d, rng, size=cfg.shots)
            p_shot, f_all = shot_tables(U, V)
        cum = np.cumsum(p_shot, axis=1)
        u = rng.random(cfg.shots) * cum[:, -1]
        o = np.minimum((cum < u[:, None]).sum(axis=1), n_out - 1)
        est[t] = f_all[np.arange(cfg.shots), o].mean(axis=0)

    eta_pred = eta_schur(coeffs, _BLOCKS[kind])
    if cfg.shots is None:
        analytic = np.zeros(len(X))
    else:
        # per-observable variance is not covariant; only the sum is predicted
        total = (eta_pred - float(np.sum(np.abs(truth) ** 2))) / cfg.shots
        analytic = np.full(len(X), total / len(X))
    extra = {"eta_analytic": eta_pred,
             "index_map": "outcome = pair * d**4 + (a1 * d + b1) * d**2 + (a2 * d + b2); pair = g * |G| + h"}
    return labels, truth, est, analytic, extra


def _run_povm(cfg, model_rng, trial_rngs):
    d = cfg.d
    if cfg.model == "pauli6":
        M = pauli_povm()
    elif cfg.model == "random":
        M = random_ic_povm(d, rng=model_rng)
    else:
        raise ValueError(f"unknown POVM model {cfg.model!r}")
    if M.dim != d:
        raise ValueError("POVM model dimension differs from d")
    T = is_faithful(max_entangled_state(d))
    probe = load_povm_spec(cfg.povm, d) if cfg.povm != "pauli6" or d == 2 else standard_ic_povm(d)
    Q = canonical_dual(probe) if cfg.dual == "canonical" else optimal_dual(probe)
    ME = elements_of(M)
    X = hermitian_basis(d)
    labels = [f"M{i}X{k}" for i in range(len(ME)) for k in range(len(X))]
    truth = np.einsum("iab,kba->ik", ME, X).reshape(-1)
    est = np.zeros((cfg.trials, len(truth)), dtype=complex)
    estimator = "maxlik" if cfg.dual == "maxlik" else "average"
    for t, rng in enumerate(trial_rngs):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            Mh = povm_tomography(M, T, cfg.shots, rng, probe_povm=probe, dual=Q, estimator=estimator)
        est[t] = np.einsum("iab,kba->ik", Mh.elements, X).reshape(-1)
    if cfg.dual == "maxlik":
        return labels, truth, est, None, {}
    if cfg.shots is None:
        return labels, truth, est, np.zeros(len(truth)), {}
    # Tr[M_i X] is estimated by d * sum_l nu(i, l) f_l[X^T]
    EE = elements_of(probe)
    pil = np.einsum("iab,lce,beac->il", ME, EE, T.T.reshape(d, d, d, d)).real
    fT = np.einsum("lij,kji->kl", Q.elements.conj(), X)       # f_l[X_k^T]
    second = d * d * np.einsum("il,kl->ik", pil, np.abs(fT) ** 2)
    analytic = ((second - np.abs(truth.reshape(len(ME), len(X))) ** 2) / cfg.shots).reshape(-1)
    return labels, truth, est, analytic, {}


_RUNNERS = {"state": _run_state, "process": _run_process, "povm": _run_povm}


def run_experiment(cfg: ExperimentConfig) -> ExperimentRecord:
    start = time.perf_counter()
    model_rng, trial_rngs = _streams(cfg)
    labels, truth, est, analytic, extra = _RUNNERS[cfg.task](cfg, model_rng, trial_rngs)
    rec = ExperimentRecord(asdict(cfg), labels, np.asarray(truth, dtype=complex), est,
                           None if analytic is None else np.asarray(analytic, dtype=float), extra)
    if cfg.task == "process" and cfg.shots is not None:
        rec.extra["eta_empirical"] = cfg.shots * math.fsum(rec.mse) + float(np.sum(np.abs(rec.truth) ** 2))
    rec.wall_clock = time.perf_counter() - start
    if cfg.out:
        write_record(cfg.out, rec)
    return rec


def compare_duals(cfg: ExperimentConfig, duals=("canonical", "optimal")) -> list[dict]:
    """Run the same seeded experiment once per dual and tabulate errors.

    ``analytic_prior`` is the prior-averaged single-shot error summed over
    the observables, the quantity the optimal dual minimizes.
    """
    rows = []
    for dual in duals:
        c = ExperimentConfig(**{**asdict(cfg), "dual": dual, "out": None})
        rec = run_experiment(c)
        row = {"dual": dual, "mse": math.fsum(rec.mse),
               "analytic": None if rec.analytic is None else math.fsum(rec.analytic)}
        if dual != "maxlik" and cfg.task == "state":
            P = load_povm_spec(cfg.povm, cfg.d)
            prior = _prior(cfg)
            Q = canonical_dual(P) if dual == "canonical" else optimal_dual(P, prior)
            X = hermitian_basis(cfg.d)[1:] * np.sqrt(2)
            E = Ensemble.single(prior)
            row["analytic_prior"] = math.fsum(statistical_error(Q.coefficients(x), P, E, x) for x in X)
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# records

def _sidecar(path: Path) -> Path:
    return path.with_suffix(".trials.csv")


def write_record(path, rec: ExperimentRecord, sidecar: bool = True) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = {"schema": rec.schema, "config": rec.config, "observables": rec.observables,
            "summary": rec.summary(), "wall_clock": rec.wall_clock}
    path.write_text(json.dumps(data, indent=2))
    if sidecar:
        err = rec.sq_errors
        with open(_sidecar(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["trial", "observable", "estimate_re", "estimate_im", "sq_error"])
            for t in range(rec.estimates.shape[0]):
                for k in range(rec.estimates.shape[1]):
                    e = rec.estimates[t, k]
                    w.writerow([t, k, repr(float(e.real)), repr(float(e.imag)), repr(float(err[t, k]))])


def read_record(path) -> ExperimentRecord:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
        if data.get("schema") != SCHEMA:
            raise ValueError(f"unsupported record schema {data.get('schema')!r}")
        s = data["summary"]
        truth = np.array(s["truth_re"]) + 1j * np.array(s["truth_im"])
        analytic = None if s["analytic"] is None else np.array(s["analytic"], dtype=float)
        config, observables = data["config"], data["observables"]
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ValueError(f"malformed record {path}: {exc}") from exc
    est = np.empty((config["trials"], len(observables)), dtype=complex)
    side = _sidecar(path)
    if side.exists():
        with open(side, newline="") as fh:
            for row in csv.DictReader(fh):
                est[int(row["trial"]), int(row["observable"])] = float(row["estimate_re"]) + 1j * float(row["estimate_im"])
    else:
        est[:] = np.nan
    known = {"mse", "mean_re", "mean_im", "variance", "truth_re", "truth_im", "analytic", "ratio"}
    extra = {k: v for k, v in s.items() if k not in known}
    return ExperimentRecord(config, observables, truth, est, analytic, extra, data.get("wall_clock", 0.0),
                            data["schema"])
