"""From raw abundance tables to ranked master predictors.

A toy microbe-metabolite study: counts for 40 taxa in 80 samples, where a
few taxa drive a block of metabolites. The workflow filters rare taxa,
applies the centered log-ratio transform, standardizes, fits the model
with one coefficient left unpenalized, then ranks taxa by how many metabolites they
influence and checks how much of a metabolite subset they explain.

Run: python demos/02_microbe_metabolite_workflow.py
"""

import numpy as np

from bmaster import ConstraintMask, RegressionData, SamplerConfig, run_chain, select_edges
from bmaster import subset_top_predictors
from bmaster.evaluation import cumulative_canonical_correlation
from bmaster.pipeline import AbundanceTable, clr_transform, filter_features, standardize_columns

g = np.random.default_rng(3)
N, taxa, mets = 80, 40, 25

# Log-normal abundances, with a handful of taxa absent from most samples.
log_abund = g.normal(0.0, 1.0, (N, taxa))
counts = np.round(np.exp(log_abund + 3.0) * (g.random((N, taxa)) < 0.9))
counts[:, 35:] *= g.random((N, 5)) < 0.1
table = AbundanceTable(counts, [f"taxon{j}" for j in range(taxa)],
                       [f"s{i}" for i in range(N)])

kept = filter_features(table, min_prevalence=0.2, min_mean_rel_abundance=1e-4)
print(f"{len(table.features)} taxa -> {len(kept.features)} after prevalence/abundance filtering")

Z, _, _ = standardize_columns(clr_transform(kept))

# Taxa 0-3 each drive metabolites 0-9; everything else is noise.
drivers = [kept.features.index(f"taxon{j}") for j in range(4)]
B = np.zeros((Z.shape[1], mets))
B[np.ix_(drivers, range(10))] = g.choice([-1.0, 1.0], (4, 10)) * g.uniform(0.6, 1.2, (4, 10))
Y, _, _ = standardize_columns(Z @ B + g.standard_normal((N, mets)))

# Suppose earlier work established that taxon0 acts on met0: leave that
# coefficient unpenalized so the prior does not shrink it toward zero.
penalized = np.ones((Z.shape[1], mets), dtype=int)
penalized[kept.features.index("taxon0"), 0] = 0
mask = ConstraintMask(penalized)

data = RegressionData(Z, Y, kept.features, tuple(f"met{q}" for q in range(mets)))
archive = run_chain(data, mask, SamplerConfig(iterations=1500, burn_in=100, seed=7))
report = select_edges(archive, x_names=data.x_names, y_names=data.y_names)
print(f"selected {int(report.selected.sum())} of {mask.C.size} edges "
      f"(sparsity {report.sparsity:.3f})")
p0 = kept.features.index("taxon0")
print(f"unpenalized taxon0 -> met0: median {report.median[p0, 0]:.3f}, "
      f"95% interval [{report.lo[p0, 0]:.3f}, {report.hi[p0, 0]:.3f}]")

print("\nmaster predictors over all metabolites:")
print(report.predictors_frame().head(6).to_string(index=False))

subset = [f"met{q}" for q in range(10)]
top = subset_top_predictors(report.selected, subset, k=5, names=data.y_names)
print("\nmaster predictors for metabolites met0-met9:")
for p, fis, n in top:
    print(f"  {data.x_names[p]:<8s} FIS {fis:.3f}  ({n} of 10)")

curve = cumulative_canonical_correlation(Y[:, :10], Z, top)
print("\nfirst canonical correlation with the top-k predictors:",
      " ".join(f"k={k}: {c:.3f}" for k, c in enumerate(curve, 1)))
