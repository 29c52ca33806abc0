"""Synthetic corpora and the supervision-ratio split.

Run: python demos/03_datasets.py
"""
from sigmae import data

print(data.interpret_scan("look right thrice after run left"))
print(data.interpret_scan("jump around left and walk twice"))
print(data.interpret_pcfg("echo append append E18 C13 , L18 M17 , R1 L1 Y1 T18 J18"))

scan = data.generate_mini_scan(100, rng=0)
for x, z in scan.pairs[:3]:
    print(" ".join(x), "->", " ".join(z))
print("vocab sizes", len(scan.vocab_x), len(scan.vocab_z))
print("mini grammar size", len(data.mini_scan_commands()), "full", len(data.full_scan_commands()))

split = data.split_corpus(scan, eta=0.1, seed=0)
print("D_xz/D_x/D_z =", len(split.xz), len(split.x), len(split.z), " eta =", split.eta)

pcfg = data.generate_mini_pcfg_set(5, depth=2, rng=1)
for x, z in pcfg.pairs:
    print(" ".join(x), "->", " ".join(z))
