# Copyright 2026 The clear Authors.
# Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

"""Independent numpy reference values for the unit tests.

Gradients use complex-step differentiation; assignments use exhaustive
search. Run once and commit the output: python3 gen_oracles.py > oracles.json
"""

import itertools
import json

import numpy as np

rng = np.random.default_rng(20260101)


def softplus(z):
    return np.log(1 + np.exp(z))


def sigmoid(z):
    return 1 / (1 + np.exp(-z))


def mlp(params, x):
    (w1, b1), (w2, b2), (w3, b3) = params
    z1 = w1 @ x + b1
    z2 = w2 @ softplus(z1) + b2
    return w3 @ softplus(z2) + b3, z1, z2


def jacobian(params, x):
    (w1, _), (w2, _), (w3, _) = params
    _, z1, z2 = mlp(params, x)
    return w3 @ np.diag(sigmoid(z2)) @ w2 @ np.diag(sigmoid(z1)) @ w1


def ssm_loss(params, xs, vs):
    total = 0
    for x, v in zip(xs, vs):
        s, _, _ = mlp(params, x)
        total = total + v @ jacobian(params, x) @ v + 0.5 * (s @ s)
    return total / len(xs)


def flatten(params):
    return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in params])


def unflatten(theta, shapes):
    out, i = [], 0
    for r, c in shapes:
        w = theta[i:i + r * c].reshape(r, c)
        i += r * c
        b = theta[i:i + r]
        i += r
        out.append((w, b))
    return out


def complex_step_grad(f, theta, h=1e-30):
    g = np.zeros(theta.size)
    for i in range(theta.size):
        t = theta.astype(complex)
        t[i] += 1j * h
        g[i] = f(t).imag / h
    return g


def mlp_case():
    d, h, n = 3, 4, 5
    shapes = [(h, d), (h, h), (d, h)]
    params = [(rng.uniform(-0.8, 0.8, (r, c)), rng.uniform(-0.3, 0.3, r)) for r, c in shapes]
    xs = rng.normal(size=(n, d))
    vs = rng.choice([-1.0, 1.0], size=(n, d))
    theta = flatten(params)
    loss = ssm_loss(params, xs, vs)
    grad = complex_step_grad(lambda t: ssm_loss(unflatten(t, shapes), xs, vs), theta)
    outs = [mlp(params, x)[0] for x in xs]
    jvps = [jacobian(params, x) @ v for x, v in zip(xs, vs)]
    return {
        "dim": d, "hidden": h,
        "layers": [{"weight": w.tolist(), "bias": b.tolist()} for w, b in params],
        "x": xs.tolist(), "v": vs.tolist(),
        "forward": [o.tolist() for o in outs],
        "jvp": [j.tolist() for j in jvps],
        "ssm_loss": float(loss),
        "ssm_grad": grad.tolist(),
    }


def adam_case():
    lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8
    theta = rng.normal(size=4)
    grads = rng.normal(size=(3, 4))
    m = np.zeros(4)
    v = np.zeros(4)
    out = theta.copy()
    history = []
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        lr_t = lr * np.sqrt(1 - b2 ** t) / (1 - b1 ** t)
        out = out - lr_t * m / (np.sqrt(v) + eps)
        history.append(out.tolist())
    return {"lr": lr, "theta": theta.tolist(), "grads": grads.tolist(), "after_each_step": history}


def ce_case():
    cases = []
    for logits, label in [([1.0, 2.0, 3.0], 2), ([0.0, 0.0], 0), ([1000.0, -1000.0, 0.0], 1), ([-2.5, 0.3, 0.3, 4.0], 0)]:
        z = np.array(logits)
        p = np.exp(z - z.max())
        p /= p.sum()
        loss = -(z[label] - z.max() - np.log(np.exp(z - z.max()).sum()))
        g = p.copy()
        g[label] -= 1
        cases.append({"logits": logits, "label": label, "loss": float(loss), "grad": g.tolist()})
    return cases


def regularizer_case():
    k, d, n = 3, 4, 6
    S = rng.normal(size=(k, d))
    P = rng.normal(size=(n, d))
    targets = S + 0.1 * rng.normal(size=(k, d))

    def l_sm(s):
        return sum(((s[j] - targets[j]) ** 2).sum() for j in range(k)) / k

    def l_eu(s):
        return sum(sum(((s[j] - P[h]) ** 2).sum() for h in range(n)) / n for j in range(k))

    mu = P.mean(axis=0)
    cov = np.cov(P.T, ddof=1)
    cov = cov + 1e-4 * np.trace(cov) / d * np.eye(d)
    inv = np.linalg.inv(cov)

    def l_ma(s):
        return sum(np.sqrt((s[j] - mu) @ inv @ (s[j] - mu)) for j in range(k)) / k

    def cgrad(f):
        return complex_step_grad(lambda t: f(t.reshape(k, d)), S.ravel()).reshape(k, d)

    return {
        "concepts": S.tolist(), "pool": P.tolist(), "targets": targets.tolist(),
        "sm": {"loss": float(l_sm(S)), "grad": cgrad(l_sm).tolist()},
        "euclidean": {"loss": float(l_eu(S)), "grad": cgrad(l_eu).tolist()},
        "mahalanobis": {"loss": float(l_ma(S)), "grad": cgrad(l_ma).tolist(), "mu": mu.tolist(), "sigma_inv": inv.tolist()},
    }


def best_assignment(sim):
    k, n = sim.shape
    best, best_cols = -np.inf, None
    for cols in itertools.permutations(range(n), k):  # lexicographic order
        total = sum(sim[i, c] for i, c in enumerate(cols))
        if total > best:
            best, best_cols = total, cols
    return float(best), list(best_cols)


def assignment_cases():
    cases = []
    for k, n in [(2, 3), (3, 5), (4, 6), (4, 4)]:
        sim = rng.uniform(-1, 1, (k, n))
        total, cols = best_assignment(sim)
        cases.append({"sim": sim.tolist(), "total": total, "cols": cols})
    # Integer matrices with many optimal assignments exercise the tie rule.
    for k, n in [(3, 4), (3, 5), (4, 6)]:
        sim = rng.integers(0, 3, (k, n)).astype(float)
        total, cols = best_assignment(sim)
        cases.append({"sim": sim.tolist(), "total": total, "cols": cols})
    cases.append({"sim": [[1.0, 1.0, 1.0], [1.0, 1.0, 1.0]], "total": 2.0, "cols": [0, 1]})
    return cases


def cosine_case():
    A = rng.normal(size=(3, 5))
    B = rng.normal(size=(4, 5))
    An = A / np.linalg.norm(A, axis=1, keepdims=True)
    Bn = B / np.linalg.norm(B, axis=1, keepdims=True)
    return {"a": A.tolist(), "b": B.tolist(), "cos": (An @ Bn.T).tolist()}


print(json.dumps({
    "mlp": mlp_case(),
    "adam": adam_case(),
    "cross_entropy": ce_case(),
    "regularizers": regularizer_case(),
    "assignment": assignment_cases(),
    "cosine": cosine_case(),
}, indent=1))
