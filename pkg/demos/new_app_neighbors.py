"""Do app embeddings point users at apps they go on to buy?

Trains skip-gram vectors on the first 80% of a preference-clustered log,
shows the neighbours of the most popular app and compares new-app hit rates
with a popularity baseline.
"""

from collections import Counter

from spendseq import embed, ingest, pipeline, synth

events, _, truth = synth.generate(synth.preference_cluster_preset())
seqs = ingest.collapse_daily(events, ingest.IN_APP)
split = ingest.split_day(*ingest.day_range(seqs), 0.8)
train = ingest.truncate_sequences(seqs, split)

model = embed.train_embeddings(pipeline.app_sequences(train), embed.TrainConfig(seed=0))
top = Counter(a for s in train.values() for a in s.apps).most_common(1)[0][0]
print(f"neighbours of {top} (cluster {truth.app_cluster(top)})")
for app, cos in embed.nearest(model, top, 5):
    print(f"  {app} cluster {truth.app_cluster(app)} cosine {cos:.3f}")

hits = pipeline.evaluate_new_apps(model, train, pipeline.new_app_split(seqs, split))
print(f"\nhit rate  embeddings {hits['embedding_hit_rate']:.3f}  popularity {hits['popularity_hit_rate']:.3f}"
      f"  ({hits['n_users']} users)")
