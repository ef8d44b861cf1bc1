# Counting attention work: full, windowed, and row-based encoders.
#
# Self-attention over L tokens scores L^2 query-key pairs per layer. Long
# scenes make that the dominant cost, so the package offers two ways to
# spend less: a sliding window (each token sees w neighbors either side)
# and the multi-row layout (R independent rows of length L_s).

from tvsg.encoder import WINDOW, EncoderConfig, attention_pair_count

FULL_CFG = EncoderConfig(dim=64, layers=1, heads=2)


def window_cfg(w):
    return EncoderConfig(dim=64, layers=1, heads=2, attention=WINDOW, window=w)


print(f"{'L':>6} {'full':>12} {'window 64':>12} {'window 128':>12}")
for L in (128, 512, 1024, 2048):
    row = [attention_pair_count(L, FULL_CFG),
           attention_pair_count(L, window_cfg(64)),
           attention_pair_count(L, window_cfg(128))]
    print(f"{L:>6} {row[0]:>12,} {row[1]:>12,} {row[2]:>12,}")

# Near the sequence edges a window has fewer neighbors, so the count is a
# little below the L*(2w+1) upper bound:
L, w = 1024, 128
print(f"\nL={L}, w={w}: {attention_pair_count(L, window_cfg(w)):,} pairs "
      f"(bound {L * (2 * w + 1):,})")

# The multi-row model runs full attention inside each row only. Twelve rows
# of 128 tokens cover the same 1536 token budget at a fraction of the pairs
# a flat encoder would need for a 1024-token scene:
rows, seg_len = 12, 128
per_row = attention_pair_count(seg_len, FULL_CFG)
print(f"\n{rows} rows x {seg_len} tokens: {rows * per_row:,} pairs")
print(f"flat 1024-token encoder:  {attention_pair_count(1024, FULL_CFG):,} pairs")
