# # Scoring the scenarios against TREC measurements
#
# TREC counts per million PBMC are converted into a percentage of the birth
# value, then compared with the model's thymic-origin share at each age-bin
# midpoint.

# In[1]:

from thymodyn import SdConfig, TREC_DATA, dataset_to_percentage, preset_params, run_sd
from thymodyn.validation import fit_report, qualitative_checks

for b, (mid, pct) in zip(TREC_DATA, dataset_to_percentage()):
    print(f"{b.age_lo:>3}-{b.age_hi:<3} mid={mid:>5}  log10 TREC={b.log10_trec:.2f}  -> {pct:6.2f}%  (n={b.n})")
print("individuals:", TREC_DATA.total_individuals)


# Sum of squared errors for each preset.

# In[2]:

runs = {k: run_sd(SdConfig(), preset_params(k)) for k in (1, 2, 3)}
for k, tr in runs.items():
    rep = fit_report(tr, f"s{k}", "sd", wall_time_s=0.0)
    worst = max(range(12), key=lambda i: abs(rep.residuals[i]))
    print(f"s{k}: SSE={rep.sse:9.1f}  largest residual {rep.residuals[worst]:+.1f} at bin {worst}")


# Shape findings for each scenario, reported rather than raised.

# In[3]:

for finding in qualitative_checks(runs):
    print(finding)
