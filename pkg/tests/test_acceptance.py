"""Acceptance gate for the whole toolkit.

Each test covers one release criterion and prints a single PASS/FAIL line
(run with ``pytest tests/test_acceptance.py -s`` to see them all). The
criteria rest on oracle equivalence, numeric invariants, and thresholds on
a seeded synthetic exam; nothing here depends on scanned data.

Notes on two measurement choices:
  * Registration recovery is scored on ground-truth inlier correspondences
    (mean reprojection error of the estimated affine on the uncorrupted
    matches).
  * "Three-class accuracy" for the baseline-inadequacy criterion is the
    mean per-class recall (balanced accuracy). The synthetic mixture is 70%
    empty boxes, so plain accuracy cannot drop below 0.70 for any classifier
    that handles empty boxes, including the trivial always-empty rule;
    balanced accuracy is the only reading under which the required < 0.70
    bound is attainable at all.
"""

import filecmp
import itertools
import math
import time
from pathlib import Path

import numpy as np
import pytest

import omrkit.classifiers.bovw as bovw_module
from omrkit.classifiers import (ClassScores, CnnConfig, LabeledSample,
                                ThresholdModel, classify, classify_nbc,
                                load_model, save_model, train_baseline_svm,
                                train_bovw, train_cnn, train_nbc)
from omrkit.classifiers.cnn import build_network
from omrkit.classifiers.nbc import NbcModel
from omrkit.cli import main, render_csv, render_xml
from omrkit.dataset import (ExamMetadata, Question, SynthConfig,
                            augment_samples, collect_labeled_samples,
                            generate_synthetic_exam)
from omrkit.evaluation import kfold_split, train_test_for_fold
from omrkit.features import (descriptor_bag, gradient_magnitude,
                             handcrafted_vector, hog_features,
                             standardize_roi)
from omrkit.classifiers.bovw import Vocabulary, encode_bovw
from omrkit.grading import award, grade_sheet
from omrkit.imageops import rotation_about, to_gray
from omrkit.registration import (Keypoint, MatchSet, RegistrationConfig,
                                 detect_features, estimate_transform,
                                 register_sheet)
from omrkit.strategy import StrategyKind, StrategySpec
from omrkit.types import CLASS_SUBSETS, AnswerClass, RoiBox, RoiImage

C, X, E = AnswerClass.CONFIRMED, AnswerClass.CROSSED_OUT, AnswerClass.EMPTY


#: Collected pass/fail lines, echoed after the run by a conftest summary
#: hook so they remain visible under pytest's output capture.
ACCEPTANCE_LINES: list[str] = []


def report(name: str, ok: bool, detail: str = "") -> None:
    line = f"{'PASS' if ok else 'FAIL'} [PRIMARY] {name}"
    if detail:
        line += f" -- {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


# =============================================================================
# criterion 1: grading decision rule equals a brute-force oracle
# =============================================================================


def decision_oracle(labels, correct, weight):
    """Independent transliteration of the per-question grading pseudocode."""
    answer = None
    answers = 0
    for i, cls in enumerate(labels):
        check1 = cls == X
        check2 = answers == 0
        check3 = cls == C
        if (check1 and check2) or check3:
            answer = i
        if check3:
            answers += 1
    if answers <= 1 and answer is not None and answer == correct:
        return weight
    return 0.0


class ScriptedModel:
    classes = (C, X, E)

    def __init__(self, script):
        self.script = list(script)
        self.i = 0

    def classify(self, roi):
        label = self.script[self.i % len(self.script)]
        self.i += 1
        scores = {c: (0.9 if c == label else 0.05) for c in self.classes}
        return ClassScores(scores=scores, predicted=label, confidence=0.9)


def one_question_metadata(choices, correct):
    boxes = [RoiBox(rect=(5 + ci * 12, 5, 10, 10), question_index=0,
                    choice_index=ci) for ci in range(choices)]
    return ExamMetadata(exam_id="t", pages=1, questions=[
        Question(index=0, weight=1.0, correct_choice=correct, page=0,
                 choices=boxes)])


def test_criterion_1_decision_rule_oracle():
    t0 = time.perf_counter()
    checked = 0
    for choices in (4, 5):
        image = np.full((20, 5 + choices * 12 + 5, 3), 255, dtype=np.uint8)
        for labels in itertools.product((C, X, E), repeat=choices):
            for correct in range(choices):
                meta = one_question_metadata(choices, correct)
                spec = StrategySpec(kind=StrategyKind.SF,
                                    stage1=ScriptedModel(labels))
                got = grade_sheet(image, meta, spec).total
                expect = decision_oracle(labels, correct, 1.0)
                assert got == expect, (labels, correct, got, expect)
            checked += 1
    elapsed = time.perf_counter() - t0
    report("decision-rule oracle equivalence",
           checked == 3 ** 4 + 3 ** 5 and elapsed < 1.0,
           f"{checked} assignments x all correct choices in {elapsed:.2f}s")


# =============================================================================
# criterion 2: robust affine estimation recovery
# =============================================================================


def _kp(x, y):
    return Keypoint(x=float(x), y=float(y), scale=1.0, orientation=0.0,
                    descriptor=np.zeros(4))


def test_criterion_2_registration_recovery():
    t0 = time.perf_counter()
    successes = 0
    trials = 100
    for trial in range(trials):
        rng = np.random.default_rng(1000 + trial)
        theta = math.radians(rng.uniform(-3.0, 3.0))
        dx, dy = rng.uniform(-10.0, 10.0, size=2)
        gt = rotation_about(424.5, 549.5, theta)
        gt[0, 2] += dx
        gt[1, 2] += dy

        n = 60
        src = rng.uniform((0, 0), (850, 1100), size=(n, 2))
        dst = src @ gt[:2, :2].T + gt[:2, 2]
        dst += rng.normal(0.0, 0.25, dst.shape)  # inlier localization noise
        n_out = n // 10
        outliers = rng.choice(n, size=n_out, replace=False)
        dst[outliers] += rng.uniform(40.0, 200.0, (n_out, 2)) * \
            rng.choice([-1.0, 1.0], (n_out, 2))

        matches = MatchSet(pairs=[(i, i, 0.1) for i in range(n)])
        t = estimate_transform(matches,
                               [_kp(*p) for p in src],
                               [_kp(*p) for p in dst])
        inliers = np.setdiff1d(np.arange(n), outliers)
        mapped = src[inliers] @ t.matrix[:2, :2].T + t.matrix[:2, 2]
        err = float(np.linalg.norm(mapped - dst[inliers], axis=1).mean())
        successes += int(err < 0.5)
    elapsed = time.perf_counter() - t0
    report("registration recovery under perturbation",
           successes >= 95 and elapsed < 30.0,
           f"{successes}/{trials} trials < 0.5 px in {elapsed:.1f}s")


# =============================================================================
# criterion 3: feature pipeline matches naive double-loop oracles
# =============================================================================


def naive_gradient(g):
    h, w = g.shape
    out = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            dx = (g[i, min(j + 1, w - 1)] - g[i, max(j - 1, 0)]) / \
                (min(j + 1, w - 1) - max(j - 1, 0))
            dy = (g[min(i + 1, h - 1), j] - g[max(i - 1, 0), j]) / \
                (min(i + 1, h - 1) - max(i - 1, 0))
            out[i, j] = abs(dx) + abs(dy)
    return out


def naive_hog(g, bins=8, cell=4, crop=216):
    h, w = g.shape
    dxf = np.zeros((h, w))
    dyf = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            dxf[i, j] = (g[i, min(j + 1, w - 1)] - g[i, max(j - 1, 0)]) / \
                (min(j + 1, w - 1) - max(j - 1, 0))
            dyf[i, j] = (g[min(i + 1, h - 1), j] - g[max(i - 1, 0), j]) / \
                (min(i + 1, h - 1) - max(i - 1, 0))
    y0 = (h - crop) // 2
    x0 = (w - crop) // 2
    n_cells = crop // cell
    hist = np.zeros((n_cells, n_cells, bins))
    for i in range(crop):
        for j in range(crop):
            dx = dxf[y0 + i, x0 + j]
            dy = dyf[y0 + i, x0 + j]
            mag = abs(dx) + abs(dy)
            theta = math.atan2(dy, dx) % math.pi
            b = min(int(theta / (math.pi / bins)), bins - 1)
            hist[i // cell, j // cell, b] += mag
    full = hist.reshape(-1)
    summaries = np.empty(1 + bins)
    summaries[0] = np.abs(np.diff(full)).mean()
    for b in range(bins):
        summaries[1 + b] = np.abs(np.diff(hist[:, :, b].reshape(-1))).mean()
    return full, summaries


def test_criterion_3_feature_fidelity():
    rng = np.random.default_rng(7)

    g_small = rng.uniform(0, 255, (23, 31))
    grad_ok = np.allclose(gradient_magnitude(g_small), naive_gradient(g_small),
                          atol=1e-12)

    # a structured 227x227 image: smooth ramp + rectangles + noise
    g = np.add.outer(np.linspace(0, 60, 227), np.linspace(0, 40, 227))
    g[40:120, 60:180] += 90.0
    g[150:200, 30:100] -= 35.0
    g += rng.normal(0, 5, g.shape)
    full, summaries = hog_features(g)
    n_full, n_summaries = naive_hog(g)
    hog_ok = (full.shape == (23328,)
              and np.allclose(full, n_full, atol=1e-9)
              and np.allclose(summaries, n_summaries, atol=1e-9))

    roi_px = np.full((48, 48), 255.0)
    roi_px[10:38, 10:14] = 20.0
    roi_px[20:24, 10:38] = 40.0
    roi_px += rng.normal(0, 4, roi_px.shape)
    roi = RoiImage(pixels=np.clip(np.stack([roi_px] * 3, -1), 0, 255)
                   .astype(np.uint8))
    v = handcrafted_vector(roi)
    std_gray = to_gray(standardize_roi(roi, 227).pixels)
    ng = naive_gradient(std_gray)
    _, ns = naive_hog(std_gray)
    nv = np.concatenate(([ng.max(), np.median(ng), ng.mean()], ns))
    hand_ok = v.shape == (12,) and np.allclose(v, nv, atol=1e-9)

    centers = rng.normal(size=(12, 6))
    descs = rng.normal(size=(70, 6))
    hist = encode_bovw(Vocabulary(centers=centers),
                       bovw_module.DescriptorBag(descriptors=descs))
    oracle = np.zeros(12)
    for d in descs:
        best, best_d = 0, np.inf
        for j, c0 in enumerate(centers):
            dist = float(((d - c0) ** 2).sum())
            if dist < best_d:
                best, best_d = j, dist
        oracle[best] += 1
    oracle /= oracle.sum()
    enc_ok = np.allclose(hist, oracle, atol=1e-9)

    report("feature fidelity vs naive oracles",
           grad_ok and hog_ok and hand_ok and enc_ok,
           f"gradient={grad_ok} hog(23328)={hog_ok} handcrafted(12)={hand_ok} "
           f"encode={enc_ok}")


# =============================================================================
# criterion 4: naive Bayes posteriors and the 5% prior override
# =============================================================================


def test_criterion_4_nbc_correctness():
    rng = np.random.default_rng(42)
    worst = 0.0
    cases = 0
    for _ in range(20):
        means = rng.normal(size=(3, 12))
        variances = rng.uniform(0.5, 2.0, size=(3, 12))
        priors = rng.uniform(0.1, 1.0, size=3)
        priors /= priors.sum()
        model = NbcModel(classes=[C, X, E], means=means, variances=variances,
                         priors=priors)
        for _ in range(50):
            v = means[rng.integers(3)] + rng.normal(0, 1.5, 12)
            scores = classify_nbc(model, v)
            direct = priors * np.prod(
                np.exp(-(v - means) ** 2 / (2 * variances))
                / np.sqrt(2 * np.pi * variances), axis=1)
            direct = direct / direct.sum()
            got = np.array([scores.scores[c] for c in (C, X, E)])
            worst = max(worst, float(np.abs(got - direct).max()))
            cases += 1
    posterior_ok = cases == 1000 and worst < 1e-9

    feats = rng.normal(size=(60, 12))
    labels = [C] * 30 + [X] * 10 + [E] * 20
    samples = [LabeledSample(roi=None, label=lab, exam_id="e",
                             sample_id=f"s{i}")
               for i, lab in enumerate(labels)]
    model = train_nbc(samples, (C, X, E), prior_override={X: 0.05},
                      features=feats)
    stored = float(model.priors[model.classes.index(X)])
    override_ok = abs(stored - 0.05) < 1e-12

    report("naive Bayes posterior correctness",
           posterior_ok and override_ok,
           f"max |err| {worst:.2e} over {cases} cases; stored override prior "
           f"{stored:.4f}")


# =============================================================================
# criterion 5: CNN backpropagation vs central finite differences
# =============================================================================


def test_criterion_5_cnn_gradient_check():
    t0 = time.perf_counter()
    config = CnnConfig(input_size=8, layers=(
        ("conv", 2, 3, 1, 0), ("relu",), ("pool", 2, 2), ("fc", None)))
    rng = np.random.default_rng(0)
    net = build_network(config, 3, rng)
    x = rng.uniform(-0.5, 0.5, (4, 8, 8, 3))
    y = rng.integers(0, 3, 4)

    net.loss_and_grads(x, y, train=False)
    analytic = [p.grad.copy() for p in net.params()]

    eps = 1e-5
    worst = 0.0
    n_checked = 0
    for p, a in zip(net.params(), analytic):
        flat = p.value.reshape(-1)
        aflat = a.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            lp = net.loss_and_grads(x, y, train=False)
            flat[i] = orig - eps
            lm = net.loss_and_grads(x, y, train=False)
            flat[i] = orig
            fd = (lp - lm) / (2 * eps)
            denom = max(abs(fd), abs(aflat[i]))
            if denom > 1e-8:
                worst = max(worst, abs(fd - aflat[i]) / denom)
            n_checked += 1
    elapsed = time.perf_counter() - t0
    report("CNN finite-difference gradient check",
           worst < 1e-4 and elapsed < 60.0,
           f"{n_checked} parameters, max relative error {worst:.2e} in "
           f"{elapsed:.1f}s")


# =============================================================================
# shared end-to-end synthetic run (criteria 6 and 7)
# =============================================================================


E2E_CONFIG = SynthConfig(seed=11, sheets=30, questions=10, choices=4,
                         class_mixture=(0.25, 0.05, 0.70))

CNN_E2E = CnnConfig(
    input_size=32,
    layers=(("conv", 8, 5, 1, 0), ("relu",), ("pool", 2, 2),
            ("conv", 16, 3, 1, 0), ("relu",), ("pool", 2, 2),
            ("fc", 64), ("relu",), ("fc", None)),
    learning_rate=0.01, momentum=0.9, epochs=10, batch_size=32)


def _sheet_of(sample):
    return sample.sample_id.split(":")[0]


def _grade_accuracy(grades, metadata, truth_by_name):
    """(question acc, sheet acc) of SheetGrade objects against known labels."""
    q_ok = q_total = s_ok = 0
    for name, grade in grades.items():
        labels = truth_by_name[name].labels
        sheet_all = True
        for q, res in zip(metadata.questions, grade.questions):
            expect = award([labels[(q.index, c)] for c in range(len(q.choices))],
                           q.correct_choice, q.weight)
            ok = abs(res.awarded - expect) < 1e-9
            q_ok += ok
            q_total += 1
            sheet_all = sheet_all and ok
        s_ok += sheet_all
    return q_ok / q_total, s_ok / len(grades)


def _balanced_accuracy(pairs):
    """Mean per-class recall over (true, predicted) pairs."""
    recalls = []
    for cls in (C, X, E):
        rel = [(t, p) for t, p in pairs if t == cls]
        if rel:
            recalls.append(sum(t == p for t, p in rel) / len(rel))
    return float(np.mean(recalls))


@pytest.fixture(scope="module")
def e2e():
    t0 = time.perf_counter()
    reference, metadata, sheets = generate_synthetic_exam(E2E_CONFIG)
    truth_by_name = {s.name: s for s in sheets}

    reg = RegistrationConfig()
    ref_feats = detect_features(to_gray(reference), reg.detector)
    ref_size = (reference.shape[1], reference.shape[0])
    registered = {}
    for s in sheets:
        image, _, _ = register_sheet(s.image, ref_feats, ref_size, reg)
        registered[s.name] = image

    labels = {(s.name, q, c): int(cls)
              for s in sheets for (q, c), cls in s.labels.items()}
    samples = collect_labeled_samples(sorted(registered.items()), metadata,
                                      labels)
    augmented = augment_samples(samples)

    # sheet-level 5-fold split: every sheet is graded exactly once, held out
    names = sorted(registered)
    fold_of = {name: i % 5 for i, name in enumerate(names)}

    # descriptor bags are classifier-independent; compute them once
    bag_by_id = {s.sample_id: descriptor_bag(standardize_roi(s.roi, 64))
                 for s in samples + augmented}

    results = {}
    for kind in ("bovw", "cnn"):
        grades = {}
        box_pairs = []
        for fold in range(5):
            train = [s for s in samples if fold_of[_sheet_of(s)] != fold]
            train_ids = {s.sample_id for s in train}
            train += [a for a in augmented if a.source_id in train_ids]
            test = [s for s in samples if fold_of[_sheet_of(s)] == fold]
            if kind == "bovw":
                model = train_bovw(train, (C, X, E), k=64, seed=fold,
                                   bags=[bag_by_id[s.sample_id] for s in train])
            else:
                model = train_cnn(train, (C, X, E), config=CNN_E2E, seed=fold)
            spec = StrategySpec(kind=StrategyKind.SF, stage1=model)
            for name in (n for n in names if fold_of[n] == fold):
                grades[name] = grade_sheet(registered[name], metadata, spec,
                                           sheet_id=name)
            box_pairs += [(s.label, classify(model, s.roi).predicted)
                          for s in test]
        q_acc, s_acc = _grade_accuracy(grades, metadata, truth_by_name)
        results[kind] = {"q_acc": q_acc, "s_acc": s_acc,
                         "balanced": _balanced_accuracy(box_pairs)}

    otsu_pairs = [(s.label, classify(ThresholdModel(), s.roi).predicted)
                  for s in samples]
    results["otsu_balanced"] = _balanced_accuracy(otsu_pairs)

    # every two-stage pairing, trained on a 12-sheet subset, graded on 2 sheets
    train_names = set(names[:12])
    sub_train = [s for s in samples if _sheet_of(s) in train_names]
    sub_ids = {s.sample_id for s in sub_train}
    sub_aug = [a for a in augmented if a.source_id in sub_ids]
    stage_models = {}
    for subset_name, stage in (("b", 1), ("c", 2)):
        classes = CLASS_SUBSETS[subset_name]
        pool = [s for s in sub_train + sub_aug if s.label in classes]
        stage_models[(subset_name, "nbc")] = train_nbc(pool, classes)
        stage_models[(subset_name, "bovw")] = train_bovw(
            pool, classes, k=32, seed=0,
            bags=[bag_by_id[s.sample_id] for s in pool])
        cnn_cfg = CnnConfig(input_size=32, layers=CNN_E2E.layers,
                            learning_rate=0.01, epochs=6, batch_size=32)
        stage_models[(subset_name, "cnn")] = train_cnn(
            pool, classes, config=cnn_cfg, seed=stage)

    pairing_results = {}
    grade_names = names[12:14]
    for k1 in ("nbc", "bovw", "cnn"):
        for k2 in ("nbc", "bovw", "cnn"):
            spec = StrategySpec(kind=StrategyKind.TWO_STAGE,
                                stage1=stage_models[("b", k1)],
                                stage2=stage_models[("c", k2)])
            spec.validate()
            grades = {name: grade_sheet(registered[name], metadata, spec,
                                        sheet_id=name)
                      for name in grade_names}
            pairing_results[(k1, k2)] = _grade_accuracy(grades, metadata,
                                                        truth_by_name)

    return {"results": results, "pairings": pairing_results,
            "elapsed": time.perf_counter() - t0}


def test_criterion_6_end_to_end_synthetic(e2e):
    r = e2e["results"]
    ok = True
    details = []
    for kind in ("bovw", "cnn"):
        q, s = r[kind]["q_acc"], r[kind]["s_acc"]
        details.append(f"{kind}: question {q:.4f} sheet {s:.4f}")
        ok = ok and q >= 0.95 and s >= 0.75 and s <= q + 1e-12
    pairings_ok = len(e2e["pairings"]) == 9 and all(
        s <= q + 1e-12 for q, s in e2e["pairings"].values())
    ok = ok and pairings_ok and e2e["elapsed"] < 900.0
    report("end-to-end synthetic grading",
           ok,
           "; ".join(details) + f"; 9 two-stage pairings runnable="
           f"{pairings_ok}; total {e2e['elapsed']:.0f}s")


def test_criterion_7_baseline_inadequacy(e2e):
    r = e2e["results"]
    otsu = r["otsu_balanced"]
    bovw = r["bovw"]["balanced"]
    cnn = r["cnn"]["balanced"]
    report("threshold-baseline inadequacy",
           otsu < 0.70 and bovw > 0.85 and cnn > 0.85,
           f"balanced 3-class accuracy: otsu {otsu:.4f} < 0.70; "
           f"bovw {bovw:.4f}, cnn {cnn:.4f} > 0.85")


# =============================================================================
# criterion 8: evaluation-protocol fidelity (instrumented)
# =============================================================================


def test_criterion_8_protocol_fidelity(monkeypatch):
    rng = np.random.default_rng(3)

    def roi(seed, dark):
        r = np.random.default_rng(seed)
        px = np.full((24, 24), 255.0)
        if dark:
            px[6:18, 6:18] = r.uniform(0, 60)
            px[r.integers(0, 24), :] = 0.0
        px += r.normal(0, 5, px.shape)
        return RoiImage(pixels=np.clip(np.stack([px] * 3, -1), 0, 255)
                        .astype(np.uint8))

    samples = []
    for i in range(30):
        for cls in (C, X, E):
            samples.append(LabeledSample(
                roi=roi(100 * i + int(cls), cls != E), label=cls,
                exam_id="e0", sample_id=f"p:{int(cls)}:{i}"))
    augmented = augment_samples(samples)
    everything = samples + augmented

    vocab_bag_counts = []
    real_build = bovw_module.build_vocabulary

    def spy_build(bags, k=bovw_module.DEFAULT_K, **kwargs):
        vocab_bag_counts.append(len(bags))
        return real_build(bags, k=k, **kwargs)

    monkeypatch.setattr(bovw_module, "build_vocabulary", spy_build)

    folds = kfold_split(everything, k=5, seed=0)
    fold_of = {s.sample_id: i for i, f in enumerate(folds) for s in f}
    aug_train_only = True
    vocab_train_only = True
    for i in range(5):
        train, test = train_test_for_fold(folds, i)
        aug_train_only &= all(not s.augmented for s in test)
        train_ids = {s.sample_id for s in train}
        for a in augmented:
            # an augmented variant trains a fold iff its source is not held out
            aug_train_only &= ((a.sample_id in train_ids)
                               == (fold_of[a.source_id] != i))
        n_before = len(vocab_bag_counts)
        train_bovw(train, (C, X, E), k=8, seed=i)
        # the vocabulary saw exactly the training bags of this fold
        vocab_train_only &= (vocab_bag_counts[n_before:] == [len(train)])

    report("evaluation-protocol fidelity",
           aug_train_only and vocab_train_only,
           f"augmented train-only={aug_train_only}; vocabulary built from "
           f"train folds only={vocab_train_only} (bag counts "
           f"{vocab_bag_counts})")


# =============================================================================
# criterion 9: determinism and round-trip
# =============================================================================


GOLDEN_ROWS = [("sheet_a.png", 10.0), ('b<&>".png', 2.5), ("c.png", 0.0)]


def test_criterion_9_determinism_and_round_trip(tmp_path):
    # (a) fixed-seed CLI runs are byte-reproducible end to end
    outputs = []
    for run in ("r1", "r2"):
        base = tmp_path / run
        data = base / "data"
        assert main(["synth", "--out", str(data), "--seed", "5",
                     "--sheets", "3", "--questions", "3", "--choices", "4",
                     "--mixture", "0.35,0.15,0.50", "--noise-std", "6"]) == 0
        assert main(["train", "--data", str(data), "--out", str(base / "m"),
                     "--strategy", "SF", "--classifier", "nbc",
                     "--seed", "0"]) == 0
        assert main(["grade", "--reference", str(data / "reference.png"),
                     "--metadata", str(data / "metadata.json"),
                     "--sheets", str(data / "sheets"),
                     "--strategy-file", str(base / "m" / "strategy.json"),
                     "--out", str(base / "g"), "--seed", "0"]) == 0
        outputs.append(base)
    cli_ok = True
    for rel in ("data/reference.png", "data/labels.csv", "data/truth.csv",
                "m/model.npz", "g/report.csv", "g/report.xml", "g/report.json"):
        cli_ok &= filecmp.cmp(outputs[0] / rel, outputs[1] / rel,
                              shallow=False)

    # (b) save/load returns identical ClassScores for every model kind
    data = outputs[0] / "data"
    from omrkit.cli import load_training_samples
    samples = load_training_samples(data)
    probes = [s.roi for s in samples[:5]]
    models = {
        "threshold": ThresholdModel(),
        "baseline": train_baseline_svm(samples, (C, X, E), seed=0),
        "nbc": train_nbc(samples, (C, X, E)),
        "bovw": train_bovw(samples, (C, X, E), k=16, seed=0),
        "cnn": train_cnn(samples, (C, X, E), config=CnnConfig(
            input_size=16, layers=(("conv", 4, 3, 1, 0), ("relu",),
                                   ("pool", 2, 2), ("fc", None)),
            epochs=2, batch_size=16), seed=0),
    }
    roundtrip_ok = True
    for name, model in models.items():
        path = tmp_path / f"{name}.npz"
        save_model(model, path)
        loaded = load_model(path)
        for probe in probes:
            a = classify(model, probe)
            b = classify(loaded, probe)
            roundtrip_ok &= (a.scores == b.scores
                             and a.predicted == b.predicted
                             and a.confidence == b.confidence)

    # (c) CSV/XML renderings match the checked-in golden files bit-exact
    golden_dir = Path(__file__).parent / "data"
    golden_ok = (
        render_csv(GOLDEN_ROWS).encode("utf-8")
        == (golden_dir / "golden_report.csv").read_bytes()
        and render_xml(GOLDEN_ROWS).encode("utf-8")
        == (golden_dir / "golden_report.xml").read_bytes())

    report("determinism and round-trip",
           cli_ok and roundtrip_ok and golden_ok,
           f"cli bytes={cli_ok} model round-trip={roundtrip_ok} "
           f"golden files={golden_ok}")
