"""Builders shared across test modules."""
from evomsn.backbone import make_backbone
from evomsn.engine import MSNPipeline
from evomsn.spectral import PeriodSet
from evomsn.stat_predictor import StatPredictorBank


def small_pipeline(kind, rng, L=8, H=4, periods=(4, 3), kernel=3, zero_bank=False):
    freqs = [min(max(1, round(L / p)), L // 2) for p in periods]
    ps = PeriodSet(list(periods), freqs, [1.0] * len(periods), L)
    bank = StatPredictorBank(list(periods), L, H, hidden=3, seed=int(rng.integers(1000)))
    if zero_bank:
        bank.store.flat[:] = 0
    else:
        # positive output bias keeps the std relu active for most draws
        for i in range(len(periods)):
            bank.store[f"s{i}.std.b2"][...] = 1.0
    bb = make_backbone(kind, L, H, seed=int(rng.integers(1000)), kernel_size=kernel)
    return MSNPipeline(ps, bank, bb)


def oracle_kwargs(pipe, bank_views=None, bb_views=None):
    return dict(periods=pipe.periods.periods, bank_params=bank_views or pipe.bank.store.views,
                bb_kind=pipe.backbone.kind, bb_params=bb_views or pipe.backbone.store.views,
                kernel=getattr(pipe.backbone, "kernel_size", 1), eps=pipe.eps)
