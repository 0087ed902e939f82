"""Regenerates fixtures/embeddings/words.tsv: 64-dimensional word vectors for
the offline embedder. Each word mixes a few hand-picked topic axes with a
hash-seeded noise component, so related words land near each other."""

import hashlib
import math
from pathlib import Path

DIM = 64
# topic axes: 0 hair/grooming, 1 washing/water, 2 cleanliness/garbage, 3 fur/softness,
# 4 fighting, 5 sky/flight, 6 drink/bar, 7 cold/ice
WORDS = {
    "shampoo": {0: 1.0, 1: 0.7, 2: 0.3},
    "hair": {0: 1.0, 3: 0.5},
    "hairy": {0: 0.8, 3: 0.8},
    "wash": {1: 1.0, 2: 0.5, 0: 0.3},
    "soap": {1: 0.8, 2: 0.6},
    "lather": {1: 0.8, 0: 0.5},
    "bubbles": {1: 0.7, 6: 0.2},
    "conditioner": {0: 0.9, 3: 0.4},
    "scalp": {0: 0.9},
    "shower": {1: 1.0},
    "clean": {2: 1.0, 1: 0.4},
    "bottle": {6: 0.5, 1: 0.3},
    "water": {1: 0.9, 7: 0.2},
    "swamp": {1: 0.6, 2: 0.3},
    "sunken": {1: 0.5},
    "garbage": {2: 0.9},
    "trash": {2: 0.9},
    "compactor": {2: 0.6},
    "chute": {2: 0.5, 5: 0.2},
    "carbonite": {7: 0.6, 2: 0.2},
    "frozen": {7: 0.9},
    "freezes": {7: 0.9},
    "ice": {7: 1.0, 1: 0.3},
    "snow": {7: 0.9, 1: 0.2},
    "fur": {3: 1.0, 0: 0.5},
    "soft": {3: 0.9},
    "gentle": {3: 0.8},
    "brave": {4: 0.8},
    "loyal": {4: 0.3, 3: 0.3},
    "duel": {4: 1.0},
    "duels": {4: 1.0},
    "fight": {4: 1.0},
    "fighting": {4: 1.0},
    "battle": {4: 0.9},
    "lightsaber": {4: 0.8},
    "attack": {4: 0.9},
    "shaft": {5: 0.5},
    "antenna": {5: 0.5},
    "floating": {5: 0.8, 1: 0.3},
    "fly": {5: 1.0},
    "flies": {5: 1.0},
    "sky": {5: 1.0},
    "beer": {6: 1.0, 1: 0.2},
    "cantina": {6: 0.9},
    "drink": {6: 1.0, 1: 0.3},
    "bar": {6: 0.9},
    "glass": {6: 0.6},
}


def noise(word: str) -> list:
    out = []
    block = 0
    while len(out) < DIM:
        d = hashlib.sha256(f"{word}:{block}".encode()).digest()
        out.extend((b / 255.0) * 2 - 1 for b in d)
        block += 1
    return out[:DIM]


def main() -> None:
    out = Path(__file__).resolve().parent.parent / "fixtures" / "embeddings"
    out.mkdir(parents=True, exist_ok=True)
    lines = ["# word<TAB>64 space-separated values; regenerate with scripts/gen_embedding_table.py"]
    for word in sorted(WORDS):
        n = noise(word)
        norm = math.sqrt(sum(x * x for x in n))
        v = [0.35 * x / norm for x in n]
        for axis, w in WORDS[word].items():
            v[axis] += w
        norm = math.sqrt(sum(x * x for x in v))
        lines.append(word + "\t" + " ".join(f"{x / norm:.6f}" for x in v))
    (out / "words.tsv").write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
