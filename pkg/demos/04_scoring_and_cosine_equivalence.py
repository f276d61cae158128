"""
Verification scoring, and when it collapses to cosine
=====================================================

A trial asks: were the enrollment side and the test side produced by
the same speaker? The score is an exact log-likelihood ratio under the
model -- no scoring backend to train, no length normalization heuristics.
"""

import numpy as np

from psda import (
    LabeledScores,
    PsdaModel,
    SideStats,
    Trial,
    cosine_score,
    eer,
    llr_score,
    min_dcf,
    sample,
    score_matrix,
    synth_dataset,
    VmfParams,
)

d = 64
mu = np.eye(d)[0]
model = PsdaModel(w=30.0, b=2.0, mu=mu)

# Sides are sufficient statistics: (count, vector sum). Pooling three
# enrollment cuts of one speaker is just adding their embeddings.
spk = sample(VmfParams(mu, model.b), 1, seed=1)[0]
enroll = SideStats.from_embeddings(sample(VmfParams(spk, model.w), 3, seed=2))
same = SideStats.from_embeddings(sample(VmfParams(spk, model.w), 1, seed=3))
other_spk = sample(VmfParams(mu, model.b), 1, seed=4)[0]
diff = SideStats.from_embeddings(sample(VmfParams(other_spk, model.w), 1, seed=5))

print("llr same speaker :", llr_score(model, Trial(enroll, same)))
print("llr diff speaker :", llr_score(model, Trial(enroll, diff)))

# Batch scoring: every enrollment against every test in one call.
tests = [same, diff]
print("\nscore_matrix:\n", score_matrix(model, [enroll], tests))

# --- The cosine connection -------------------------------------------
# With b = 0 (uniform speaker prior) and one embedding per side, the
# llr is a strictly increasing function of the cosine score, so every
# ranking metric (EER, minDCF, the whole DET curve) is identical.
truth = PsdaModel(w=20.0, b=0.0, mu=mu)
table, labels = synth_dataset(truth, n_speakers=100, n_per=10, seed=11)
X = table.vectors
spk_of = np.repeat(np.arange(100), 10)

rng = np.random.default_rng(11)
i = rng.integers(0, 1000, 40000)
j = rng.integers(0, 1000, 40000)
keep = i != j
i, j = i[keep], j[keep]
is_tar = spk_of[i] == spk_of[j]

stats = [SideStats(1, x) for x in X]
llrs = score_matrix(truth, stats, stats)[i, j]
coss = np.array([cosine_score(X[a], X[b]) for a, b in zip(i, j)])

for name, s in (("psda", llrs), ("cosine", coss)):
    sc = LabeledScores(s[is_tar], s[~is_tar])
    print(f"{name:6s} EER={100 * eer(sc):7.4f}%  minDCF(0.05)={min_dcf(sc, p_tar=0.05):.4f}")

# Same operating points, different calibration: the llr axis is
# interpretable (log odds), the cosine axis is not.
print(f"\nscore ranges: llr [{llrs.min():.2f}, {llrs.max():.2f}]"
      f"  cosine [{coss.min():.2f}, {coss.max():.2f}]")
