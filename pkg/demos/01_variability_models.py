"""
Variability models and their configurations
============================================

A variability model lists typed features (Boolean, Enumeration, Real) and
cross-tree constraints between Booleans.  A configuration is a plain float
vector with one entry per feature.
"""

import numpy as np

from confevade.vm import config_space_log10, gen_motiv_like, repair_types, sample_random, validate

# a generated model shaped like a video-generator product line
model = gen_motiv_like(seed=0)
print(model.counts(), "features,", len(model.constraints), "constraints")
for c in model.constraints:
    print("  ", c)

# the space is far too large to enumerate
print(f"about 10^{config_space_log10(model):.1f} configurations")

# random sampling only returns configurations that satisfy everything
X = sample_random(model, 5, seed=1)
print("sampled", X.shape, "all valid:", all(validate(model, x).valid for x in X))

# push one configuration off its domains and look at what breaks
x = X[0].copy()
x[model.boolean_idx[0]] = 0.4
x[model.enum_idx[0]] = 8.6
x[model.real_idx[0]] = 30.0
for name, why in validate(model, x).violations:
    print(f"  {name}: {why}")

# type repair fixes Booleans and Enumeration rounding, never Real bounds
# nor enumeration values above the cardinality
fixed = repair_types(model, x)
print("after repair:", [why for _, why in validate(model, fixed).violations])
print("repair is idempotent:", np.array_equal(repair_types(model, fixed), fixed))
