"""
Per-day versus per-presence attribution
=======================================

Counting a death against a nurse because it happened on a date the nurse
worked inflates the tally: a night shift touches two dates, and a death
at 02:00 on the day of an afternoon shift is nowhere near that nurse.
Here both rules run on the same synthetic ward, followed by the
same-zone / opposite-zone risk table.
"""

from wardstats import attribution, rostersim
from wardstats.attribution import AttributionPolicy

config, profiles, intensity, _ = rostersim.morning_heavy_setup(horizon_days=56, seed=5)
roster, _, deaths = rostersim.gen_ward(intensity, rostersim.RegistrationModel(), config, profiles)

nurses = ["FT", "pool-morning-1", "pool-afternoon-1", "pool-night-1"]
print(f"{'nurse':>18} {'per_day':>8} {'per_presence':>13}")
for n in nurses:
    by_day = attribution.attribute(roster, deaths, n, AttributionPolicy("per_day"))
    present = attribution.attribute(roster, deaths, n, AttributionPolicy("per_presence"))
    print(f"{n:>18} {by_day:>8} {present:>13}")

###############################################################################
# Handover rules. A death registered at 07:05 happens while both the
# outgoing night nurse and the incoming morning nurse are clocked in.
for rule in attribution.HANDOVER_RULES:
    pol = AttributionPolicy("per_presence", rule)
    counts = [attribution.attribute(roster, deaths, n, pol) for n in nurses]
    print(f"{rule:>14}:", counts)

###############################################################################
# Zone risk. Each death is split by whether it happened in the zone the
# nurse was working (AB or CD). Nurses with hours within 10% of FT's are
# kept so the comparison is like for like.
flt = attribution.similar_hours(roster, "FT", 0.10)
rows = attribution.risk_table(roster, deaths, flt)
print(attribution.risk_table_csv(rows))

# a single row straight from counts
print(attribution.zone_risk_row(139, 52, 3577.0, "DP"))
