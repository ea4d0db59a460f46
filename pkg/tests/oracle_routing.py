"""Reference routing oracle for the tests.

A deliberately naive transcription of the per-capsule procedure using
dicts keyed by capsule indices and plain `math` calls. It shares no code
with the package under test, so trajectory agreement is a genuine
cross-check rather than a tautology.
"""

import math


def reference_route(predictions, num_iterations):
    """Run routing on `predictions[j][d][i]` nested lists.

    Returns a list of per-iteration dicts with keys "b", "c" (dicts keyed
    by (i, j)) and "v" (dict keyed by j of coordinate lists). Iteration 0
    is the state before any logit update; `num_iterations` updates follow.
    """
    num_out = len(predictions)
    num_in = len(predictions[0][0])
    dims = [len(mat) for mat in predictions]

    def vote(i, j):
        return [predictions[j][d][i] for d in range(dims[j])]

    b = {(i, j): 0.0 for i in range(num_in) for j in range(num_out)}
    history = []
    for _ in range(num_iterations + 1):
        c = {}
        for i in range(num_in):
            denom = 0.0
            for k in range(num_out):
                denom += math.exp(b[(i, k)])
            for j in range(num_out):
                c[(i, j)] = math.exp(b[(i, j)]) / denom
        v = {}
        for j in range(num_out):
            s = [0.0] * dims[j]
            for i in range(num_in):
                for d in range(dims[j]):
                    s[d] += c[(i, j)] * vote(i, j)[d]
            norm_sq = 0.0
            for d in range(dims[j]):
                norm_sq += s[d] * s[d]
            if norm_sq == 0.0:
                v[j] = [0.0] * dims[j]
            else:
                norm = math.sqrt(norm_sq)
                v[j] = [(norm_sq / (1.0 + norm_sq)) * (s[d] / norm) for d in range(dims[j])]
        history.append({"b": dict(b), "c": c, "v": v})
        for i in range(num_in):
            for j in range(num_out):
                dot = 0.0
                for d in range(dims[j]):
                    dot += vote(i, j)[d] * v[j][d]
                b[(i, j)] = b[(i, j)] + dot
    # drop the trailing logit update so the last history entry is final
    return history


def max_deviation(history, trajectory):
    """Worst entrywise |delta| between oracle history and a trajectory."""
    worst = 0.0
    for step, rec in zip(history, trajectory):
        bmat = rec.logits.values
        cmat = rec.couplings.values
        for (i, j), val in step["b"].items():
            worst = max(worst, abs(val - bmat[i][j]))
        for (i, j), val in step["c"].items():
            worst = max(worst, abs(val - cmat[i][j]))
        for j, vec in step["v"].items():
            out = rec.outputs.outputs[j]
            for d, val in enumerate(vec):
                worst = max(worst, abs(val - out[d]))
    return worst
