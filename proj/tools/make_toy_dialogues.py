#!/usr/bin/env python3
"""Writes the templated toy dialogue corpus used by the training and curves demos.

Output is raw pipeline input (id, source, prompt, response). The corpus is
small and repetitive on purpose: a bigram model must be able to learn it.

    python3 tools/make_toy_dialogues.py > data/fixtures/toy_dialogues.jsonl
"""

import argparse
import json
import random

TOPICS = {
    "anxiety": {
        "prompts": [
            "i have been feeling anxious about {thing} lately",
            "my anxiety gets worse every time i think about {thing}",
            "i feel nervous and restless because of {thing}",
        ],
        "things": ["work", "school", "my exams", "the future", "my health"],
        "responses": [
            "it sounds like anxiety is weighing on you right now . try slow breathing in for four and out for six .",
            "anxiety can feel overwhelming but it does pass . try slow breathing and name five things you can see .",
        ],
    },
    "sleep": {
        "prompts": [
            "i can not sleep at night because of {thing}",
            "i keep waking up at night thinking about {thing}",
            "my sleep has been terrible since {thing} started",
        ],
        "things": ["work", "my family", "the news", "money problems"],
        "responses": [
            "poor sleep makes everything feel harder . a calm routine before bed and writing worries down can help .",
            "it is hard to rest when your mind is busy . writing worries down before bed can help you let go .",
        ],
    },
    "grief": {
        "prompts": [
            "my {thing} passed away and i miss them so much",
            "i lost my {thing} last month and i still feel empty",
            "since my {thing} died i feel like nothing matters",
        ],
        "things": ["mother", "father", "grandmother", "best friend", "dog"],
        "responses": [
            "i am so sorry for your loss . grief takes time and it is okay to miss them every day .",
            "losing someone you love is deeply painful . grief takes time so be gentle with yourself .",
        ],
    },
    "lonely": {
        "prompts": [
            "i feel lonely even when i am around {thing}",
            "i have nobody to talk to except {thing}",
            "lately i feel so alone and {thing} do not understand",
        ],
        "things": ["people", "my classmates", "my coworkers", "my family"],
        "responses": [
            "feeling lonely is painful and you are not alone in it . reaching out to one person this week can help .",
            "loneliness can feel heavy . small steps like a short message to an old friend can help you reconnect .",
        ],
    },
    "anger": {
        "prompts": [
            "i get angry so fast when {thing} criticize me",
            "i yelled at {thing} again and i feel awful",
            "i can not control my temper around {thing}",
        ],
        "things": ["my parents", "my partner", "my boss", "my kids"],
        "responses": [
            "anger often covers hurt or stress . pausing to take three slow breaths before you respond can help .",
            "it is good that you want to change this . pausing before you respond gives you a moment to choose .",
        ],
    },
    "motivation": {
        "prompts": [
            "i have no motivation to do {thing} anymore",
            "i keep putting off {thing} and feel guilty",
            "i can not find the energy for {thing} these days",
        ],
        "things": ["my homework", "my job", "exercise", "anything"],
        "responses": [
            "low motivation is common when you are stressed . start with one small task and notice how it feels .",
            "be kind to yourself about this . breaking the work into one small task at a time can help .",
        ],
    },
}

SOURCES = ["kaggle", "hf", "reddit"]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=360)
    ap.add_argument("--seed", type=int, default=11)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    names = sorted(TOPICS)
    for i in range(args.count):
        topic = TOPICS[names[i % len(names)]]
        prompt = rng.choice(topic["prompts"]).format(thing=rng.choice(topic["things"]))
        record = {
            "id": f"toy-{i:04d}",
            "source": SOURCES[i % len(SOURCES)],
            "prompt": prompt,
            "response": rng.choice(topic["responses"]),
        }
        print(json.dumps(record))


if __name__ == "__main__":
    main()
