"""End-to-end evaluation harness.

Builds seeded model populations, runs the offline watermark stage against
"seen" attacks, then scores a test population built with "unseen" attacks
(optionally blurred) plus fresh non-extracted controls, aggregating verdict
scores into a ROC curve. The whole pipeline is a pure function of the
config's master seed.
"""

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field, asdict

import numpy as np

from .attacks import BlurConfig, ExtractionConfig, blur_prune, blur_quantize, extract
from .bim import BimConfig
from .datasets import Dataset, GenSpec, generate, split
from .datasets import random_probe_inputs
from .errors import ConfigError
from .metrics import RocCurve, roc_auc
from .nnet import Model, TrainConfig, family_spec, init_model, train
from .rng import derive_seed
from .serialize import model_digest
from .watermark import KeySet, build_verifier, confidence_profile, generate_keyset, verify

log = logging.getLogger(__name__)

NAIVE_ATTACKS = ("RET", "DIS", "TRL", "CAR", "CC")
BLUR_METHODS = ("WP", "WQ")

_KIND_BY_TOKEN = {
    "RET": "retraining",
    "DIS": "distillation",
    "TRL": "transfer_learning",
    "CAR": "cross_arch_retraining",
    "CC": "copycat",
}


def parse_attack_token(token: str):
    """'RET' -> ('RET', None); 'WP(DIS)' -> ('DIS', 'WP')."""
    token = token.strip()
    if "(" in token:
        blur_name, rest = token.split("(", 1)
        if not rest.endswith(")") or blur_name not in BLUR_METHODS:
            raise ConfigError(f"bad attack token {token!r}")
        inner = rest[:-1]
        if inner not in NAIVE_ATTACKS:
            raise ConfigError(f"bad attack token {token!r}")
        return inner, blur_name
    if token not in NAIVE_ATTACKS:
        raise ConfigError(f"unknown attack token {token!r}")
    return token, None


@dataclass(frozen=True)
class EvaluationConfig:
    master_seed: int = 0
    repetitions: int = 5
    gen: GenSpec = GenSpec()
    test_fraction: float = 0.5
    protected_family: str = "A"
    cross_arch_family: str = "C"
    nonextracted_families: tuple = ("A", "B", "C")
    n_extracted_train: int = 10
    n_nonextracted_train: int = 10
    n_extracted_test: int = 6
    n_nonextracted_test: int = 6
    seen_attacks: tuple = ("RET",)
    unseen_attacks: tuple = ("RET",)
    classifier_kind: str = "lr"
    keyset_size: int = 32
    candidate_source: str = "misclassifications"
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 1e-2
    query_budget_fraction: float = 0.5
    distill_temperature: float = 2.0
    frozen_layers: int = 1
    copycat_probe_factor: int = 20
    prune_sparsity: float = 0.5
    quantize_bits: int = 8
    bim: BimConfig = field(default_factory=BimConfig)

    def __post_init__(self):
        for attr in ("repetitions", "n_extracted_train", "n_nonextracted_train",
                     "n_extracted_test", "n_nonextracted_test", "keyset_size"):
            if getattr(self, attr) < 1:
                raise ConfigError(f"{attr} must be positive")
        if self.classifier_kind not in ("lr", "gnb"):
            raise ConfigError("classifier_kind must be 'lr' or 'gnb'")
        for token in tuple(self.seen_attacks) + tuple(self.unseen_attacks):
            parse_attack_token(token)
        object.__setattr__(self, "seen_attacks", tuple(self.seen_attacks))
        object.__setattr__(self, "unseen_attacks", tuple(self.unseen_attacks))
        object.__setattr__(self, "nonextracted_families", tuple(self.nonextracted_families))

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


def eval_config_from_dict(doc: dict) -> EvaluationConfig:
    doc = dict(doc)
    if "gen" in doc:
        doc["gen"] = GenSpec(**doc["gen"])
    if "bim" in doc:
        doc["bim"] = BimConfig(**{k: (tuple(v) if k == "clip_range" else v)
                                  for k, v in doc["bim"].items()})
    try:
        return EvaluationConfig(**doc)
    except TypeError as exc:
        raise ConfigError(f"bad evaluation config: {exc}") from exc


def load_eval_config(path) -> EvaluationConfig:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return eval_config_from_dict(doc)


@dataclass(frozen=True)
class EvaluationReport:
    pos_scores: tuple  # verdict scores of extracted test models, all repetitions
    neg_scores: tuple
    roc: RocCurve
    config_digest: str
    repetition_scores: tuple  # per rep: (pos tuple, neg tuple)
    train_profiles: tuple  # per rep: (extracted (M,n), non-extracted (M,n)) arrays


def _train_cfg(cfg: EvaluationConfig, seed: int, **over) -> TrainConfig:
    return TrainConfig(
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate,
        seed=seed,
        **over,
    )


def train_fresh(cfg: EvaluationConfig, data: Dataset, family: str, seed: int) -> Model:
    spec = family_spec(family, data.dims, data.class_count)
    model = init_model(spec, derive_seed(seed, "init"))
    return train(model, data.features, data.labels, _train_cfg(cfg, derive_seed(seed, "train")))


def _extraction_config(cfg: EvaluationConfig, base: str, data: Dataset, seed: int) -> ExtractionConfig:
    family = cfg.cross_arch_family if base == "CAR" else cfg.protected_family
    spec = family_spec(family, data.dims, data.class_count)
    kwargs = {}
    if base == "DIS":
        kwargs["distill_temperature"] = cfg.distill_temperature
    if base == "TRL":
        kwargs["frozen_layers"] = cfg.frozen_layers
    return ExtractionConfig(
        kind=_KIND_BY_TOKEN[base],
        surrogate_spec=spec,
        train_cfg=_train_cfg(cfg, seed),
        query_budget_fraction=cfg.query_budget_fraction,
        **kwargs,
    )


def build_attacked_model(cfg: EvaluationConfig, victim: Model, token: str, data: Dataset, seed: int) -> Model:
    """Run one attack token (e.g. 'RET' or 'WP(DIS)') against the victim."""
    base, blur_name = parse_attack_token(token)
    ext_cfg = _extraction_config(cfg, base, data, seed)
    if base == "TRL":
        pre_data = generate(cfg.gen, derive_seed(seed, "pretrain-data"))
        pretrained_spec_family = cfg.protected_family
        pretrained = train_fresh(cfg, pre_data, pretrained_spec_family, derive_seed(seed, "pretrain"))
        model = extract(victim, data.features, ext_cfg, pretrained=pretrained)
    elif base == "CC":
        probes = random_probe_inputs(
            cfg.copycat_probe_factor * len(data), data.dims, seed=derive_seed(seed, "probes")
        )
        model = extract(victim, probes, ext_cfg)
    else:
        model = extract(victim, data.features, ext_cfg)
    if blur_name == "WP":
        model = blur_prune(model, cfg.prune_sparsity)
    elif blur_name == "WQ":
        model = blur_quantize(model, cfg.quantize_bits)
    return model


def informed_attack_pipeline(victim: Model, extraction_cfg: ExtractionConfig,
                             blur_cfg: BlurConfig, train_inputs, pretrained: Model = None) -> Model:
    """Extraction followed by blurring; provenance records both stages."""
    extracted = extract(victim, train_inputs, extraction_cfg, pretrained=pretrained)
    if blur_cfg.method == "weight_pruning":
        return blur_prune(extracted, blur_cfg.sparsity)
    return blur_quantize(extracted, blur_cfg.bits)


def _attack_population(cfg, victim, tokens, data, count, seed, tag):
    """`count` models, attacks distributed evenly across `tokens`."""
    return [
        build_attacked_model(cfg, victim, tokens[i % len(tokens)], data,
                             derive_seed(seed, f"{tag}/{i}"))
        for i in range(count)
    ]


def _control_population(cfg, data, count, seed, tag):
    return [
        train_fresh(cfg, data, cfg.nonextracted_families[i % len(cfg.nonextracted_families)],
                    derive_seed(seed, f"{tag}/{i}"))
        for i in range(count)
    ]


def run_repetition(cfg: EvaluationConfig, train_set: Dataset, rep_seed: int):
    """One offline+online pass; returns (pos scores, neg scores, profiles)."""
    protected = train_fresh(cfg, train_set, cfg.protected_family, derive_seed(rep_seed, "protected"))
    ext_train = _attack_population(
        cfg, protected, cfg.seen_attacks, train_set, cfg.n_extracted_train, rep_seed, "ext-train"
    )
    ne_train = _control_population(cfg, train_set, cfg.n_nonextracted_train, rep_seed, "ne-train")
    keyset = generate_keyset(
        protected, ext_train, ne_train, train_set, cfg.keyset_size, cfg.bim,
        candidate_source=cfg.candidate_source,
    )
    verifier = build_verifier(ext_train, ne_train, keyset, cfg.classifier_kind)

    ext_test = _attack_population(
        cfg, protected, cfg.unseen_attacks, train_set, cfg.n_extracted_test, rep_seed, "ext-test"
    )
    ne_test = _control_population(cfg, train_set, cfg.n_nonextracted_test, rep_seed, "ne-test")

    def scores(models):
        keyed = sorted((model_digest(m), verify(m, verifier, keyset).score) for m in models)
        return tuple(s for _, s in keyed)

    prof_e = np.stack([confidence_profile(m, keyset) for m in ext_train])
    prof_ne = np.stack([confidence_profile(m, keyset) for m in ne_train])
    return scores(ext_test), scores(ne_test), (prof_e, prof_ne), keyset


def run_raw_evaluation(cfg: EvaluationConfig) -> EvaluationReport:
    dataset = generate(cfg.gen, derive_seed(cfg.master_seed, "data"))
    train_set, _test_set = split(dataset, cfg.test_fraction, derive_seed(cfg.master_seed, "split"))
    rep_results = []
    for rep in range(cfg.repetitions):
        rep_seed = derive_seed(cfg.master_seed, f"rep/{rep}")
        pos, neg, profiles, _keyset = run_repetition(cfg, train_set, rep_seed)
        log.info("repetition %d: mean extracted score %.3f, mean control score %.3f",
                 rep, float(np.mean(pos)), float(np.mean(neg)))
        rep_results.append((pos, neg, profiles))
    all_pos = tuple(s for pos, _, _ in rep_results for s in pos)
    all_neg = tuple(s for _, neg, _ in rep_results for s in neg)
    roc = roc_auc(all_pos, all_neg)
    return EvaluationReport(
        pos_scores=all_pos,
        neg_scores=all_neg,
        roc=roc,
        config_digest=cfg.digest(),
        repetition_scores=tuple((pos, neg) for pos, neg, _ in rep_results),
        train_profiles=tuple(profiles for _, _, profiles in rep_results),
    )


def export_report(report: EvaluationReport, path):
    """ROC points plus summary metrics, re-importable without precision loss."""
    with open(path, "w", newline="") as fh:
        fh.write(
            f"# seedmark-report auc={report.roc.auc!r} "
            f"tpr_at_fpr0={report.roc.tpr_at_fpr0!r} "
            f"fpr_at_tpr1={report.roc.fpr_at_tpr1!r} "
            f"config={report.config_digest}\n"
        )
        writer = csv.writer(fh)
        writer.writerow(["fpr", "tpr"])
        for fpr, tpr in report.roc.points:
            writer.writerow([repr(fpr), repr(tpr)])


def read_report_csv(path):
    """Return (points, auc recomputed from the points)."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    points = [tuple(float(c) for c in line.split(",")) for line in lines[2:] if line]
    pts = np.array(points)
    return points, float(np.trapezoid(pts[:, 1], pts[:, 0]))


def dump_confidences(extracted_pop, nonextracted_pop, keyset: KeySet, path):
    """Per-watermark confidences of both populations, with group means."""
    prof_e = np.stack([confidence_profile(m, keyset) for m in extracted_pop])
    prof_ne = np.stack([confidence_profile(m, keyset) for m in nonextracted_pop])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = (
            ["watermark", "mean_extracted", "mean_nonextracted"]
            + [f"extracted_{i}" for i in range(len(extracted_pop))]
            + [f"nonextracted_{i}" for i in range(len(nonextracted_pop))]
        )
        writer.writerow(header)
        for i in range(len(keyset)):
            writer.writerow(
                [i, repr(float(prof_e[:, i].mean())), repr(float(prof_ne[:, i].mean()))]
                + [repr(float(v)) for v in prof_e[:, i]]
                + [repr(float(v)) for v in prof_ne[:, i]]
            )


def diversity_soft_check(cfg: EvaluationConfig, diverse_seen, single_seen) -> dict:
    """Soft (logged, non-failing) check that a more diverse seen-attack mix
    yields at least as good an AUC on the same unseen attack."""
    auc = {}
    for label, seen in (("diverse", diverse_seen), ("single", single_seen)):
        run_cfg = eval_config_from_dict({**asdict(cfg), "seen_attacks": seen,
                                         "gen": asdict(cfg.gen), "bim": asdict(cfg.bim)})
        auc[label] = run_raw_evaluation(run_cfg).roc.auc
    if auc["diverse"] + 1e-12 < auc["single"]:
        log.warning("diversity ordering not observed: %s", auc)
    else:
        log.info("diversity ordering holds: %s", auc)
    return auc
