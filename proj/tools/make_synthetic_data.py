#!/usr/bin/env python3
"""Writes the synthetic desk-scale corpus under data/.

Everything here is invented for testing and demos. Output is deterministic
for a fixed --seed, so rerunning the script reproduces the committed files.
"""

import argparse
import json
import random
from pathlib import Path

# (id, problem, [reference texts])
EXERCISES = [
    ("ex-treatment",
     "We want to choose between 2 treatments A and B. For both, we got same mean recovery rate "
     "but higher variance for treatment A. Which treatment would you discard, and why?",
     ["Treatment A, because results with higher variance are less homogeneous",
      "Treatment A, since it is less homogeneous than treatment B"]),
    ("ex-linreg-classification",
     "Can linear regression be applied to classification? Why or why not?",
     ["No, as the output variable of linear regression is continuous"]),
    ("ex-vehicles",
     "A sensor records how many vehicles pass a crossing each hour. Is this a discrete or a continuous variable?",
     ["It's a discrete variable because it's counting the number of vehicles"]),
    ("ex-fraud-threshold",
     "A model outputs a fraud score for each transaction. When do we flag a transaction as fraudulent?",
     ["If the output is over the threshold then x is fraudulent"]),
    ("ex-learning-rate",
     "Gradient descent keeps diverging on your dataset. Which hyperparameter would you change first?",
     ["Lower the learning rate, because large steps overshoot the minimum"]),
    ("ex-overfitting",
     "Training accuracy is 99% while validation accuracy is 70%. What is happening?",
     ["Overfitting, since the model memorizes training examples instead of general patterns"]),
    ("ex-coin",
     "Is flipping a coin a discrete or a continuous random experiment?",
     ["Discrete, because there are only two possible outcomes"]),
    ("ex-median",
     "Income data has a few extreme values. Should we summarize it with the mean or the median?",
     ["The median, because it is robust to extreme values"]),
    ("ex-scaling",
     "Why should features be rescaled before running k-nearest neighbours?",
     ["Rescaling matters because distances are dominated by features with large ranges"]),
    ("ex-dropout",
     "Why does dropout help a deep network generalize?",
     ["Dropout reduces co-adaptation, because units cannot rely on specific other units"]),
    ("ex-sigmoid",
     "Why is the sigmoid function used in logistic regression?",
     ["It maps scores to probabilities, since its output lies between 0 and 1"]),
    ("ex-test-set",
     "Why must the test set stay untouched during model selection?",
     ["The estimate would be biased, because choices tuned on the test set leak information"]),
    ("ex-correlation",
     "Two variables have a correlation of 0.9. Does one cause the other?",
     ["Not necessarily, as a hidden third variable could drive both of them"]),
    ("ex-batch-size",
     "Why does a very small batch size make the loss curve noisy?",
     ["Gradient estimates vary a lot, because each update sees very few examples"]),
    ("ex-precision",
     "Spam filtering must avoid hiding real emails. Which metric should we prioritize?",
     ["Precision, because false positives hide legitimate emails"]),
    ("ex-kmeans-init",
     "Why can k-means give different clusters on different runs?",
     ["Different runs differ since the centroids are initialized at random"]),
    ("ex-regularization",
     "What happens to the weights when the L2 penalty becomes very large?",
     ["If the penalty is very large then the weights shrink towards zero"]),
    ("ex-imbalance",
     "A classifier predicts the majority class for every input and reaches 95% accuracy. Is it good?",
     ["It is useless, because accuracy hides the minority class errors"]),
    ("ex-bias",
     "Why does a linear model underfit a sinusoidal signal?",
     ["High bias, because a straight line cannot follow the curvature"]),
    ("ex-cross-validation",
     "Why use k-fold cross-validation on a small dataset?",
     ["Every example gets used for evaluation, since each fold serves once as held-out data"]),
]

# Canned generator outputs keyed by the reference cause (the generator input).
CANNED = {
    "results with higher variance are less homogeneous": [
        ("Do we prefer more homogeneous results or less?", 0.35),
        ("Which results are more spread out?", 0.62),
        ("What does a higher variance say about how homogeneous results are?", 0.80),
    ],
    "it is less homogeneous than treatment B": [
        ("Do we prefer more homogeneous results or less?", 0.30),
        ("How does variance relate to homogeneous results?", 0.66),
        ("What does a higher variance say about how homogeneous results are?", 0.81),
    ],
}

SUBJECTS = [
    "the learning rate", "the sample size", "the number of trees", "the regularization strength",
    "the batch size", "the number of clusters", "the tree depth", "the dropout rate",
    "the number of features", "the kernel width", "the momentum", "the noise level",
    "the training time", "the number of layers", "the threshold", "the window size",
]
CHANGES = ["increases", "decreases", "doubles", "is halved", "becomes very small", "becomes very large"]
EFFECTS = [
    "the variance of the estimate", "the training error", "the validation error", "the bias of the model",
    "the number of false positives", "the convergence speed", "the model capacity", "the recall",
]
OPEN_TEMPLATES = [
    "What happens to {effect} when {subject} {change}?",
    "Why does {effect} change when {subject} {change}?",
    "How does {effect} respond when {subject} {change}?",
]
BINARY_TEMPLATES = [
    "Does {effect} go up when {subject} {change}?",
    "Is {effect} affected when {subject} {change}?",
]
ALT_TEMPLATES = [
    "Does {effect} increase or decrease when {subject} {change}?",
    "Is {effect} higher or lower when {subject} {change}?",
]
WEAK_TEMPLATES = [
    "Is it true that {subject} {change}?",
    "What about {subject}?",
]

QA_PAIRS = [
    ("What kind of variable counts cars per hour?", "A discrete variable"),
    ("Which summary statistic is robust to outliers?", "The median"),
    ("What function maps logits to probabilities in binary classification?", "The sigmoid function"),
    ("Which metric penalizes false positives in spam filtering?", "Precision"),
    ("What technique randomly disables units during training?", "Dropout"),
    ("Which hyperparameter controls the step size of gradient descent?", "The learning rate"),
    ("What is the name of fitting noise in the training data?", "Overfitting"),
    ("Which clustering algorithm assigns points to the closest centroid?", "K-means clustering"),
    ("What penalty adds the squared weights to the loss?", "L2 regularization"),
    ("Which resampling scheme rotates the held-out fold?", "K-fold cross-validation"),
    ("What error source comes from overly simple models?", "High bias"),
    ("What do we call the expected squared deviation from the mean?", "The variance"),
    ("Which distribution models the number of heads in ten coin flips?", "The binomial distribution"),
    ("What plot shows the tradeoff between true and false positive rates?", "The ROC curve"),
    ("Which activation outputs zero for negative inputs?", "The ReLU function"),
    ("What algorithm computes gradients in neural networks?", "Backpropagation"),
    ("Which matrix summarizes classifier hits and misses?", "The confusion matrix"),
    ("What method reduces dimensionality via orthogonal components?", "Principal component analysis"),
    ("Which ensemble averages many decorrelated decision trees?", "A random forest"),
    ("What statistic measures linear association between two variables?", "The Pearson correlation"),
]


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


def qg_examples(rng):
    rows = []
    annotators = ["annotator-1", "annotator-2", "annotator-3", "annotator-4"]
    combos = [(s, c, e) for s in SUBJECTS for c in CHANGES for e in EFFECTS]
    rng.shuffle(combos)
    for i, (subject, change, effect) in enumerate(combos[:72]):
        kind = ["open_ended", "binary", "binary_alternatives"][i % 3]
        pool = {"open_ended": OPEN_TEMPLATES, "binary": BINARY_TEMPLATES, "binary_alternatives": ALT_TEMPLATES}[kind]
        target = rng.choice(pool).format(subject=subject, change=change, effect=effect)
        source = f"{subject[0].upper()}{subject[1:]} {change}"
        rows.append({"id": f"qg-{i + 1:03d}", "source": source, "target": target,
                     "question_type": kind, "annotator": annotators[i % 4]})
    return rows


def annotation_groups(rng, n_groups):
    groups = []
    combos = [(s, c, e) for s in SUBJECTS for c in CHANGES for e in EFFECTS]
    rng.shuffle(combos)
    for g, (subject, change, effect) in enumerate(combos[:n_groups]):
        reference = f"{effect[0].upper()}{effect[1:]} shifts, because {subject} {change}"
        picks = [
            (rng.choice(OPEN_TEMPLATES), 4.2),
            (rng.choice(ALT_TEMPLATES), 3.6),
            (rng.choice(BINARY_TEMPLATES), 2.9),
            (WEAK_TEMPLATES[0], 2.2),
            (WEAK_TEMPLATES[1], 1.4),
        ]
        rng.shuffle(picks)
        rows = []
        for k, (tmpl, quality) in enumerate(picks):
            question = tmpl.format(subject=subject, change=change, effect=effect)
            rating = min(5, max(1, round(quality + rng.gauss(0, 0.6))))
            loss = round(0.25 + 0.15 * k + rng.random() * 0.3, 4)
            rows.append({"example_id": f"ann-{g + 1:03d}-{k + 1}", "reference_text": reference,
                         "question": question, "rating": rating, "confidence_loss": loss})
        groups.append(rows)
    return groups


def interactions(rng):
    # success probability of the attempt right after feedback, per model
    models = {"minimal": 0.25, "human": 0.45, "non_question": 0.35, "question_based": 0.5}
    ex_ids = [e[0] for e in EXERCISES]
    rows = []
    t = 1_700_000_000_000
    sid = 0
    for model, p in models.items():
        for _ in range(24):
            sid += 1
            session = f"sim-{sid:04d}"
            exercise = rng.choice(ex_ids)
            correct_first = rng.random() < 0.3
            attempt = 1
            while True:
                t += 1000
                verdict = correct_first if attempt == 1 else rng.random() < p
                done = verdict or attempt == 3
                shown = None
                if not verdict:
                    shown = "Let's move to another problem." if done else f"[{model} feedback]"
                rows.append({"session_id": session, "exercise_id": exercise,
                             "student_answer": f"attempt {attempt}", "feedback_shown": shown,
                             "checker_verdict": verdict, "attempt_index": attempt,
                             "feedback_model": model, "timestamp_ms": t})
                if done:
                    break
                attempt += 1
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data")
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(args.seed)

    write_jsonl(out / "exercises.jsonl", [
        {"id": i, "problem": p, "references": [{"id": f"{i}#{k + 1}", "text": t} for k, t in enumerate(refs)]}
        for i, p, refs in EXERCISES])
    write_jsonl(out / "canned_questions.jsonl", [
        {"source": src, "candidates": [{"text": q, "score": -loss, "loss": loss} for q, loss in qs]}
        for src, qs in CANNED.items()])
    write_jsonl(out / "qg_dataset.jsonl", qg_examples(rng))
    groups = annotation_groups(rng, 50)
    write_jsonl(out / "annotations_train.jsonl", [r for g in groups[:40] for r in g])
    write_jsonl(out / "annotations_test.jsonl", [r for g in groups[40:] for r in g])
    write_jsonl(out / "interactions.jsonl", interactions(rng))
    write_jsonl(out / "qa_pairs.jsonl", [
        {"id": f"qa-{i + 1:03d}", "question": q, "answer": a} for i, (q, a) in enumerate(QA_PAIRS)])


if __name__ == "__main__":
    main()
