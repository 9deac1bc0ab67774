#!/usr/bin/env python3
"""Write a deterministic synthetic JSONL corpus from wordfreq frequency lists.

No public text corpus is reachable from the build sandbox, so the acceptance
runs sample words from wordfreq's published unigram frequencies instead.
Each document draws a small topic lexicon that is boosted for its whole
length, which gives the bursty type growth of real prose.

    make_corpus.py --lang en --bytes 210000000 --seed 1 --out en.jsonl
"""

import argparse
import bisect
import gzip
import itertools
import json
import os
import random
import sys
from pathlib import Path

try:
    import msgpack
except ImportError:
    from pip._vendor import msgpack


def find_wordlist(lang):
    import importlib.util

    spec = importlib.util.find_spec("wordfreq")
    if spec is None or spec.origin is None:
        sys.exit("wordfreq is not installed (pip install wordfreq)")
    path = Path(spec.origin).parent / "data" / f"large_{lang}.msgpack.gz"
    if not path.exists():
        sys.exit(f"no wordfreq list at {path}")
    return path


def load_words(lang, limit):
    with gzip.open(find_wordlist(lang), "rb") as f:
        buckets = msgpack.unpackb(f.read(), raw=False)[1:]
    words, weights = [], []
    for cb, bucket in enumerate(buckets):
        for w in bucket:
            if any(ch.isdigit() for ch in w):
                continue
            words.append(w)
            weights.append(10.0 ** (-cb / 100.0))
            if len(words) >= limit:
                return words, weights
    return words, weights


class Generator:
    def __init__(self, lang, seed, lexicon):
        self.rng = random.Random(seed)
        self.lang = lang
        self.words, weights = load_words(lang, lexicon)
        self.cum = list(itertools.accumulate(weights))
        # Topic words come from the mid-frequency band.
        self.mid = range(min(300, len(self.words)), len(self.words))

    def sentence(self, topic):
        rng = self.rng
        n = max(3, int(rng.gammavariate(2.5, 6.0)))
        picks = rng.choices(self.words, cum_weights=self.cum, k=n)
        for i in range(n):
            if rng.random() < 0.12:
                picks[i] = rng.choice(topic)
            elif rng.random() < 0.01:
                picks[i] = self.number()
        if self.lang == "en":
            picks = ["I" if w == "i" else ("I" + w[1:] if w.startswith("i'") else w) for w in picks]
        picks[0] = picks[0][:1].upper() + picks[0][1:]
        out = []
        for i, w in enumerate(picks):
            out.append(w)
            if i + 1 < n and rng.random() < 0.07:
                out[-1] += rng.choice([",", ",", ",", ";", ":"])
        if rng.random() < 0.04:
            k = rng.randrange(n)
            out[k] = "(" + out[k] + ")"
        return " ".join(out) + rng.choices([".", "?", "!"], weights=[90, 7, 3])[0]

    def number(self):
        rng = self.rng
        kind = rng.random()
        if kind < 0.4:
            return str(rng.randint(1900, 2030))
        if kind < 0.7:
            return str(rng.randint(1, 100))
        if kind < 0.85:
            return f"{rng.randint(1, 999)}.{rng.randint(0, 99):02d}"
        return f"{rng.randint(1, 99)}%"

    def document(self, target):
        rng = self.rng
        topic = [self.words[rng.choice(self.mid)] for _ in range(rng.randint(20, 60))]
        paras, size = [], 0
        while size < target:
            para = " ".join(self.sentence(topic) for _ in range(rng.randint(2, 7)))
            paras.append(para)
            size += len(para.encode("utf-8")) + 1
        return "\n".join(paras)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lang", default="en")
    ap.add_argument("--bytes", type=int, required=True, help="approximate output size")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--lexicon", type=int, default=200000, help="number of distinct words sampled from")
    ap.add_argument("--out", required=True)
    args = ap.parse_args()

    out = Path(args.out)
    stamp = out.with_suffix(out.suffix + ".stamp")
    key = json.dumps(vars(args), sort_keys=True)
    if out.exists() and stamp.exists() and stamp.read_text() == key:
        return

    gen = Generator(args.lang, args.seed, args.lexicon)
    tmp = out.with_suffix(out.suffix + ".tmp")
    written = 0
    with open(tmp, "w", encoding="utf-8") as f:
        while written < args.bytes:
            doc = gen.document(int(gen.rng.lognormvariate(8.0, 0.7)))
            line = json.dumps({"text": doc}, ensure_ascii=False) + "\n"
            f.write(line)
            written += len(line.encode("utf-8"))
    os.replace(tmp, out)
    stamp.write_text(key)


if __name__ == "__main__":
    main()
