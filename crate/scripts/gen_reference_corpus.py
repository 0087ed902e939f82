"""Regenerates fixtures/reference_corpus: 100 short generic documents used as
the contrast corpus for entity salience. Output is deterministic."""

import random
from pathlib import Path

TOPICS = {
    "cooking": ["kitchen", "recipe", "bread", "soup", "oven", "garlic", "butter", "dinner", "flour", "pepper"],
    "sports": ["team", "coach", "season", "match", "goal", "players", "stadium", "training", "score", "league"],
    "weather": ["rain", "storm", "wind", "clouds", "forecast", "snow", "heat", "morning", "sky", "temperature"],
    "business": ["company", "market", "price", "sales", "office", "customers", "contract", "budget", "manager", "profit"],
    "travel": ["train", "airport", "hotel", "city", "ticket", "road", "map", "tourists", "bridge", "station"],
    "school": ["teacher", "students", "class", "lesson", "exam", "library", "books", "homework", "desk", "campus"],
    "health": ["doctor", "hospital", "patients", "medicine", "sleep", "exercise", "water", "diet", "nurse", "clinic"],
    "garden": ["flowers", "soil", "trees", "seeds", "grass", "fence", "leaves", "roots", "garden", "sun"],
    "music": ["song", "band", "guitar", "concert", "voice", "piano", "stage", "album", "drums", "audience"],
    "home": ["house", "door", "window", "family", "room", "table", "light", "floor", "wall", "friends"],
}
VERBS = ["finds", "takes", "brings", "gives", "watches", "leaves", "returns", "builds", "opens", "follows",
         "starts", "helps", "asks", "keeps", "moves", "carries", "meets", "waits", "looks", "runs",
         "tells", "sees", "sets", "pulls", "reaches", "travels", "arrives", "stops", "goes", "makes"]
BASE_VERBS = ["find", "take", "bring", "give", "watch", "leave", "return", "build", "open", "follow",
              "start", "help", "ask", "keep", "move", "carry", "meet", "wait", "look", "run",
              "tell", "see", "set", "pull", "reach", "travel", "arrive", "stop", "go", "make", "learn", "hide"]
ADVERBS = ["away", "back", "again", "later", "together", "inside", "outside", "soon", "only", "first"]
PEOPLE = ["friend", "friends", "man", "woman", "boy", "girl", "family", "home", "father", "mother", "group", "others"]
ADJ = ["small", "large", "old", "new", "quiet", "busy", "long", "short", "bright", "dark", "early", "late"]
TEMPLATES = [
    "The {adj} {n1} {verb} the {n2}.",
    "Every {time} the {n1} {verb} a {adj} {n2}.",
    "Some {n1} and the {n2} are {adj} at {time}.",
    "A {n1} {verb} the {adj} {n2} near the {n3}.",
    "People say the {n1} is {adj} when the {n2} {verb} home.",
    "After the {n1}, the {n2} {verb} the {n3} again.",
    "The {person} wants to {base} the {n1} {adv}.",
    "My {person} and I {base} the {adj} {n1} {adv}.",
    "They try to {base} a {n1} and {base2} the {n2} {adv}.",
]
TIMES = ["day", "night", "week", "year", "evening", "weekend"]


def main() -> None:
    rng = random.Random(20240501)
    out = Path(__file__).resolve().parent.parent / "fixtures" / "reference_corpus"
    out.mkdir(parents=True, exist_ok=True)
    names = sorted(TOPICS)
    for i in range(100):
        topics = rng.sample(names, 2)
        pool = TOPICS[topics[0]] + TOPICS[topics[1]]
        sentences = []
        for _ in range(rng.randint(6, 10)):
            t = rng.choice(TEMPLATES)
            n1, n2, n3 = rng.sample(pool, 3)
            b1, b2 = rng.sample(BASE_VERBS, 2)
            sentences.append(t.format(adj=rng.choice(ADJ), verb=rng.choice(VERBS), time=rng.choice(TIMES),
                                      n1=n1, n2=n2, n3=n3, base=b1, base2=b2, adv=rng.choice(ADVERBS),
                                      person=rng.choice(PEOPLE)))
        text = " ".join(s[0].upper() + s[1:] for s in sentences)
        (out / f"doc_{i:03d}.txt").write_text(text + "\n")


if __name__ == "__main__":
    main()
