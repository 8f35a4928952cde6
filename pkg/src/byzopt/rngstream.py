"""Deterministic RNG streams.

Two kinds of randomness are needed:

- per-agent streams (sample choices, trigger draws, initial states) that are
  independent of agent iteration order, derived by keying a SeedSequence on
  (master_seed, agent_id, purpose);
- counter-based draws for falsified Gaussian payloads, keyed on the whole
  (seed, sender, receiver, iteration) tuple so each payload is a pure
  function of the tuple and does not depend on draw order.
"""

import numpy as np

# purpose codes keep key tuples integer-only and stable across versions
SAMPLE = 1
TRIGGER = 2
INIT = 3
BYZ_RETRY = 4
SWEEP_CELL = 5


def stream(master_seed, *keys):
    """Independent Generator for (master_seed, *keys); keys are small ints."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def keyed_normal(seed, sender, receiver, iteration, size, scale=1.0):
    """Counter-based N(0, scale^2) draw, a pure function of the key tuple."""
    bg = np.random.Philox(key=int(seed) & (2**64 - 1),
                          counter=[0, int(iteration), int(sender), int(receiver)])
    return np.random.Generator(bg).normal(0.0, scale, size=size)
