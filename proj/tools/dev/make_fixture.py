#!/usr/bin/env python3
"""Regenerates the bundled synthetic session fixture (data/fixtures/session_demo).

Deterministic: fixed seed, no timestamps. Run from the repo root:
    python3 tools/dev/make_fixture.py
"""
import json
import math
import os
import random

OUT = os.path.join(os.path.dirname(__file__), "..", "..", "data", "fixtures", "session_demo")
SESSION_LENGTH = 300.0
SLICE = 10.0
MEMBERS = ["ada", "ben", "cyd"]
VERBAL_CHANNELS = [
    "uncertainty", "argument", "justification", "suggestion", "agreement",
    "question_on_task", "question_social", "idea_verbalization", "sharing_findings",
    "hypothesis_generation", "task_sentiment_pos", "task_sentiment_neg",
    "evaluation_pos", "evaluation_neg",
]

rng = random.Random(20170416)


def make_turns():
    turns = []
    t = 1.0
    while t < SESSION_LENGTH - 6.0:
        speaker = rng.choice(MEMBERS)
        dur = round(rng.uniform(1.5, 6.0), 2)
        end = min(round(t + dur, 2), SESSION_LENGTH)
        turns.append((speaker, round(t, 2), end))
        t = end + round(rng.uniform(0.2, 2.5), 2)
    return turns


def make_frames():
    frames = []
    au_pool = [1, 2, 4, 5, 6, 7, 12, 15, 23, 25, 26, 45]
    for member in MEMBERS:
        t = 0.25
        while t < SESSION_LENGTH:
            conf = round(min(1.0, max(0.0, rng.gauss(0.92, 0.08))), 3)
            aus = []
            mood = rng.random()
            if mood < 0.25:
                aus = [6, 12]                      # joy
            elif mood < 0.35:
                aus = [4, 7]                       # confusion
            elif mood < 0.42:
                aus = [1, 2, 5, 26]                # surprise
            elif mood < 0.47:
                aus = [7, 12, 25, 26]              # delight
            else:
                aus = sorted(rng.sample(au_pool, rng.randint(0, 2)))
            frames.append({
                "member": member,
                "timestamp": round(t, 2),
                "aus": aus,
                "confidence": conf,
                "pitch": round(0.15 * math.sin(t / 17.0) + rng.gauss(0, 0.05), 4),
                "yaw": round(0.2 * math.sin(t / 23.0) + rng.gauss(0, 0.07), 4),
                "roll": round(rng.gauss(0, 0.04), 4),
            })
            t += 0.5
    return frames


def make_verbal():
    rows = []
    n_slices = int(SESSION_LENGTH / SLICE)
    for member in MEMBERS:
        for s in range(n_slices):
            for channel in VERBAL_CHANNELS:
                p = {"argument": 0.35, "suggestion": 0.3, "question_on_task": 0.25,
                     "agreement": 0.3, "idea_verbalization": 0.2,
                     "sharing_findings": 0.18}.get(channel, 0.08)
                count = 0
                while rng.random() < p and count < 4:
                    count += 1
                if count:
                    rows.append((s, member, channel, count))
    return rows


def make_ratings():
    rows = []
    n_slices = int(SESSION_LENGTH / SLICE)
    raters = {
        "r1": {"dur": 11.0, "noise": 0.15, "bias": 0},
        "r2": {"dur": 9.5, "noise": 0.2, "bias": 0},
        "r3": {"dur": 12.5, "noise": 0.55, "bias": 1},
        "r4": {"dur": 0.8, "noise": 0.1, "bias": 2},   # rушes; filtered out
    }
    for member in MEMBERS:
        phase = MEMBERS.index(member) * 2.0
        for s in range(n_slices):
            truth = max(0, min(2, int(round(1 + math.sin(s / 4.0 + phase)))))
            for rater, info in raters.items():
                score = truth
                if rng.random() < info["noise"]:
                    score = info["bias"] if rng.random() < 0.6 else rng.randint(0, 2)
                dur = round(max(0.2, rng.gauss(info["dur"], 0.8)), 2)
                rows.append((s, member, rater, score, dur))
    return rows


def main():
    os.makedirs(OUT, exist_ok=True)
    with open(os.path.join(OUT, "session.json"), "w") as f:
        json.dump({"group_id": "demo", "members": MEMBERS,
                   "session_length": SESSION_LENGTH}, f, indent=2)
        f.write("\n")
    with open(os.path.join(OUT, "turns.csv"), "w") as f:
        f.write("speaker,start,end\n")
        for speaker, start, end in make_turns():
            f.write(f"{speaker},{start},{end}\n")
    with open(os.path.join(OUT, "frames.jsonl"), "w") as f:
        for frame in make_frames():
            f.write(json.dumps(frame) + "\n")
    with open(os.path.join(OUT, "verbal.csv"), "w") as f:
        f.write("slice,member,channel,count\n")
        for s, member, channel, count in make_verbal():
            f.write(f"{s},{member},{channel},{count}\n")
    with open(os.path.join(OUT, "ratings.csv"), "w") as f:
        f.write("slice,member,rater,score,hit_duration\n")
        for s, member, rater, score, dur in make_ratings():
            f.write(f"{s},{member},{rater},{score},{dur}\n")
    print(f"fixture written to {OUT}")


if __name__ == "__main__":
    main()
