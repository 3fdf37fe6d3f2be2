from collections import Counter

import math

from nrt.desk import DeskResult, compare, desk_config, k_core, subsample
from nrt.synthetic import synthetic_records


def test_k_core_invariant():
    records = synthetic_records(15, 12, 120, seed=2)
    core = k_core(records, 4)
    users, items = Counter(r.user for r in core), Counter(r.item for r in core)
    assert core and min(users.values()) >= 4 and min(items.values()) >= 4
    assert k_core(core, 4) == core


def test_subsample_is_seeded_and_ordered():
    records = synthetic_records(10, 10, 80, seed=1)
    a, b = subsample(records, 30, 7), subsample(records, 30, 7)
    assert a == b and len(a) == 30
    assert [records.index(r) for r in a] == sorted(records.index(r) for r in a)
    assert subsample(records, 500, 7) == records


def test_desk_config_overrides(tmp_path):
    cfg = desk_config()
    assert cfg.hypers.d == 64 and cfg.max_epochs == 20
    (tmp_path / "c.cfg").write_text("d = 8\n")
    assert desk_config(tmp_path / "c.cfg").hypers.d == 8


def test_compare_smoke(tmp_path):
    (tmp_path / "c.cfg").write_text("k_u=4\nk_v=4\nword_dim=4\nd=6\nmax_epochs=2\nmin_tf=1\n"
                                    "batch_size=16\nmf_k=2\n")
    result = compare(synthetic_records(15, 12, 150, seed=4), desk_config(tmp_path / "c.cfg"),
                     size=1000, core=2)
    assert isinstance(result, DeskResult) and result.n_valid > 0
    assert all(math.isfinite(v) for v in (result.nrt_rmse, result.mf_rmse, result.global_mean_rmse))
    assert result.nrt_beats_both == (result.nrt_rmse < min(result.mf_rmse, result.global_mean_rmse))
