"""How concentrated is in-app spend in the calibrated synthetic population?

Generates the paper preset at 20k users, then prints the Gini coefficient,
a few Lorenz ordinates, the category mix and the top-1% segment.
"""

from spendseq import analytics, synth

events, profiles, _ = synth.generate(synth.calibrate_paper_preset().replace(n_users=20_000))
spend = analytics.spend_per_user(events)

print(f"users with in-app spend: {len(spend)}")
print(f"gini: {analytics.gini(spend):.3f}")
curve = analytics.lorenz(spend)
for p in (0.5, 0.9, 0.99):
    print(f"  bottom {p:.0%} of spenders hold {curve.share_at(p):.1%} of spend")

print("\ncategory mix")
for row in analytics.category_summary(events):
    print(f"  {row.category:7s} purchases {row.purchase_share:6.1%}  spend {row.spend_share:6.1%}")

seg = analytics.big_spenders(spend, 0.01, profiles)
print(f"\ntop 1%: {seg.spend_share:.1%} of spend, median age {seg.median_age_by_gender}")
print("  countries most over-represented:", sorted(seg.country_lift.items(), key=lambda kv: -kv[1])[:3])
