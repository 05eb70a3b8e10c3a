"""Session-wide caches of synthetic corpora and protocol runs shared across test modules."""

from functools import lru_cache

from writerrec.protocol import TEST_PHASES, RunConfig, run_protocol
from writerrec.synth import SynthParams, synth_dataset

DEFAULT_FATIGUE = (0.0, 0.2, 0.8, 0.5)
ZERO_FATIGUE = (0.0, 0.0, 0.0, 0.0)
SEEDS = tuple(range(10))

# criterion number -> (passed, title, detail), printed at the end of the session
ACCEPTANCE = {}


def record(number, title, ok, detail):
    ACCEPTANCE[number] = (bool(ok), title, detail)
    print(f"{'PASS' if ok else 'FAIL'}  [{number:>2}] {title}: {detail}")
    assert ok, f"criterion {number} ({title}) failed: {detail}"


@lru_cache(maxsize=None)
def corpus(seed, fatigue=DEFAULT_FATIGUE, n_writers=20, intra_noise=1.0, jitter_scale=0.2):
    return tuple(synth_dataset(SynthParams(n_writers=n_writers, seed=seed, fatigue=fatigue,
                                           intra_noise=intra_noise, jitter_scale=jitter_scale)))


@lru_cache(maxsize=None)
def run(seed, method, fatigue=DEFAULT_FATIGUE, bits=3, agg="min", phases=TEST_PHASES, **corpus_kw):
    """(report, matrices) for one seed and method; cached for the whole session."""
    cfg = RunConfig(method=method, agg=agg, bits=bits, phases=phases, seed=seed)
    return run_protocol(corpus(seed, fatigue, **corpus_kw), cfg)
