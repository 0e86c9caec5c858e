"""Self-supervised pretraining: corrupt half the features, reconstruct the row.

The pretext task never reads a label: half of each row's features are
zeroed and the network (with a reconstruction head) must recover the
clean row under an L2 loss. The pretrained body is then fine-tuned for
classification with a fresh head.

Run: python3 demos/06_ssl_pretraining.py
"""

import numpy as np

from mambatab import metrics, synthetic, tabular, training
from mambatab.model import MambaTabModel, ModelConfig
from mambatab.training import TrainConfig, finetune_after_ssl, pretrain_ssl, train_supervised

table = synthetic.logistic_table(1000, 6, 6, seed=0)
train_t, val_t, test_t = tabular.split(table, seed=0)
pre = tabular.fit(train_t)
enc_train, enc_val, enc_test = (tabular.transform(pre, t) for t in (train_t, val_t, test_t))
n = table.n_features

print("=== the corruption mask ===")
mask = training.corruption_masks(np.random.default_rng(0), n_rows=5, n_features=n)
print(f"each row zeroes exactly {n // 2} of {n} features:")
print(mask.astype(int))

print("\n=== reconstruction pretraining (labels never touched) ===")
recon = MambaTabModel(ModelConfig(n_features=n, head="reconstruction"), rng=0)
cfg = TrainConfig(seed=0, lr=1e-3, max_epochs=150)
body, pre_report = pretrain_ssl(recon, enc_train, enc_val, cfg)
print(f"val reconstruction L2: {pre_report.val_loss[0]:.4f} (untrained) -> "
      f"{min(pre_report.val_loss):.4f} after {pre_report.epochs_run} epochs")

print("\n=== classification fine-tune vs training from scratch ===")
tuned, _ = finetune_after_ssl(body, enc_train, enc_val, cfg)
auc_ssl = metrics.auroc(tuned.predict_proba(enc_test.values), enc_test.labels)

scratch, _ = train_supervised(
    MambaTabModel(ModelConfig(n_features=n), rng=0), enc_train, enc_val, cfg)
auc_scratch = metrics.auroc(scratch.predict_proba(enc_test.values), enc_test.labels)

print(f"test AUROC from scratch:    {auc_scratch:.4f}")
print(f"test AUROC SSL + fine-tune: {auc_ssl:.4f}")
