# # What does stochasticity cost?
#
# Both engines run the same scenarios at matched step size and horizon. Peak
# memory comes from a separate traced pass so it does not distort the timings.

# In[1]:

from thymodyn import ScenarioSpec
from thymodyn.bench import format_table
from thymodyn.cli import cmd_bench

reports, comparisons = cmd_bench([ScenarioSpec(k) for k in (1, 2, 3)])
print(format_table(reports))


# Ratios are ABS over SD.

# In[2]:

for c in comparisons:
    mem = "n/a" if c.mem_ratio is None else f"x{c.mem_ratio:.1f}"
    print(f"{c.scenario}: time x{c.time_ratio:.0f}, memory {mem}, SSE x{c.sse_ratio:.3f}, SD cheaper: {c.sd_cheaper}")
