"""Independent reference values for the unit tests.

Run with python3; every number printed here is pasted into the C++ tests as a
frozen constant. Nothing in this file imports the library.
"""
import json
import math

import numpy as np


def rmsnorm(x, eps):
    x = np.asarray(x, dtype=np.float64)
    return x / np.sqrt(np.mean(x * x) + eps)


def rope2(q, theta):
    c, s = math.cos(theta), math.sin(theta)
    return [q[0] * c - q[1] * s, q[0] * s + q[1] * c]


def quant(row):
    row = np.asarray(row, dtype=np.float64)
    mx = np.max(np.abs(row))
    scale = np.float32(mx / 127.0) if mx > 0 else np.float32(1.0)
    q = np.clip(np.rint(row / np.float64(scale)), -127, 127).astype(np.int8)
    return float(scale), q.tolist(), (np.float64(scale) * q).tolist()


def tfidf(docs, query):
    M = len(docs)
    vocab = sorted({t for d in docs for t in d} | set(query))
    df = {t: sum(t in d for d in docs) for t in vocab}
    idf = {t: math.log(M / (1 + df[t])) for t in vocab}

    def vec(toks):
        return np.array([toks.count(t) * idf[t] for t in vocab])

    qv = vec(query)
    out = []
    for d in docs:
        dv = vec(d)
        den = np.linalg.norm(qv) * np.linalg.norm(dv)
        out.append(float(qv @ dv / den) if den > 0 else 0.0)
    order = sorted(range(M), key=lambda i: (-out[i], i))
    return out, order


def bm25_term(M, df, tf, dl, avgdl, k1=1.2, b=0.75):
    idf = math.log((M - df + 0.5) / (df + 0.5) + 1)
    return idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))


def loss(scores, oracle):
    s = np.asarray(scores, dtype=np.float64)
    lse = np.log(np.sum(np.exp(s - s.max()))) + s.max()
    return float(np.mean([lse - s[j] for j in oracle]))


def cost(mode, M, Lc, Lq, k, Lg):
    ctx = Lq + k * Lc
    if mode == "rag":
        return ctx * ctx
    if mode == "intra":
        return Lq * ctx
    return (Lq + M * Lc) ** 2


docs = [[1, 2, 3], [2, 2, 4], [3, 4, 5, 5], [6, 7]]
query = [2, 3, 5]
scores, order = tfidf(docs, query)

out = {
    "rmsnorm_3_4": rmsnorm([3, 4], 0.0).tolist(),
    "rope_half_pi": rope2([1.0, 0.0], math.pi / 2),
    "rqwk_hand": {"qt": 4 * (2 * 3), "logit": 0.5 * 24, "key": 0.5 * 4 * 3},
    "quant_127": quant([-1.27, 1.27]),
    "tfidf_scores": scores,
    "tfidf_order": order,
    "bm25_M2": bm25_term(2, 1, 1, 5, 5),
    "rrf_1_3": 1 / 61 + 1 / 63,
    "loss_uniform_M4": loss([0, 0, 0, 0], [0, 1]),
    "loss_10_0_0": loss([10, 0, 0], [0]),
    "f1_ab_ac": 2 * 0.5 * 0.5 / (0.5 + 0.5),
    "gap_closure": 100 * (0.5 - 0.2) / (0.6 - 0.2),
    "cost_rag": cost("rag", 1, 128, 128, 4, 1),
    "cost_intra": cost("intra", 1, 128, 128, 4, 1),
    "cost_full_M512": cost("full", 512, 128, 128, 4, 1),
    "kv_ratio_toy": 2 * 2 * 2 * 8 / 32,
    "kv_ratio_paper": 2 * 34 / 2.5,
    "storage_paper_int8": 1e9 * 2560 * 1,
}
print(json.dumps(out, indent=1))
