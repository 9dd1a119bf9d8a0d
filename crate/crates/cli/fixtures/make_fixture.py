"""Regenerates the synthetic example sessions under fixtures/sessions/.

Run from this directory: python3 make_fixture.py
"""
import json
import math
import os
import random

VERBAL = [
    "uncertainty", "argument", "justification", "suggestion", "agreement",
    "question_on_task", "question_social", "idea_verbalization", "sharing_findings",
    "hypothesis_generation", "task_sentiment_pos", "task_sentiment_neg",
    "evaluation_pos", "evaluation_neg",
]
AUS = [1, 2, 4, 5, 6, 7, 12, 15, 23, 25, 26, 45]
SLICE = 10.0


def session(name, seed, members, length):
    rng = random.Random(seed)
    n_slices = int(length // SLICE)
    out = os.path.join("sessions", name)
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "session.json"), "w") as f:
        json.dump({"group_id": name, "members": members, "session_length": length}, f, indent=2)
        f.write("\n")

    # latent engagement per member drives talk, smiles and curiosity
    level = {m: [0.0] * n_slices for m in members}
    for m in members:
        x = rng.gauss(0, 1)
        for s in range(n_slices):
            x = 0.8 * x + rng.gauss(0, 0.6)
            level[m][s] = x

    with open(os.path.join(out, "turns.csv"), "w") as f:
        f.write("speaker,start,end\n")
        t = 0.5
        prev = None
        while t < length - 1.0:
            s = min(int(t // SLICE), n_slices - 1)
            weights = [math.exp(level[m][s]) for m in members]
            speaker = rng.choices(members, weights)[0]
            if speaker == prev:
                speaker = members[(members.index(speaker) + 1) % len(members)]
            dur = round(rng.uniform(1.0, 6.0), 2)
            end = min(round(t + dur, 2), length)
            f.write(f"{speaker},{t:.2f},{end:.2f}\n")
            prev = speaker
            t = round(end + rng.uniform(0.1, 1.5), 2)

    with open(os.path.join(out, "frames.jsonl"), "w") as f:
        for m in members:
            for i in range(int(length)):
                ts = i + 0.5
                s = min(int(ts // SLICE), n_slices - 1)
                p_on = 1 / (1 + math.exp(-level[m][s]))
                au = {}
                for code in AUS:
                    base = 0.35 if code in (6, 12, 25, 26) else 0.15
                    if rng.random() < base * (0.5 + p_on):
                        au[str(code)] = True
                rec = {
                    "member": m,
                    "timestamp": ts,
                    "au": au,
                    "confidence": round(rng.uniform(0.6, 1.0), 3),
                    "pitch": round(rng.gauss(0, 4 + 2 * p_on), 3),
                    "yaw": round(rng.gauss(0, 6), 3),
                    "roll": round(rng.gauss(0, 3), 3),
                }
                if rng.random() < 0.03:
                    rec["face_detected"] = False
                f.write(json.dumps(rec, sort_keys=True) + "\n")

    with open(os.path.join(out, "verbal.csv"), "w") as f:
        f.write("slice,member,channel,count\n")
        for s in range(n_slices):
            for m in members:
                for ch in VERBAL:
                    rate = 0.15 * math.exp(0.5 * level[m][s])
                    k = sum(1 for _ in range(4) if rng.random() < rate)
                    if k:
                        f.write(f"{s},{m},{ch},{k}\n")

    with open(os.path.join(out, "ratings.csv"), "w") as f:
        f.write("slice,member,rater,score,hit_duration\n")
        for j, m in enumerate(members):
            raters = [f"r{j * 3 + r + 1}" for r in range(4)]
            durations = {r: round(rng.uniform(300, 600), 1) for r in raters}
            durations[raters[-1]] = 40.0  # rushed rater, dropped by the time filter
            for s in range(n_slices):
                truth = level[m][s]
                for r in raters:
                    noise = rng.gauss(0, 0.5 if r != raters[-1] else 2.0)
                    v = truth + noise
                    score = 0 if v < -0.5 else (1 if v < 0.5 else 2)
                    f.write(f"{s},{m},{r},{score},{durations[r]}\n")


if __name__ == "__main__":
    session("group_a", 101, ["ana", "ben", "cai"], 600.0)
    session("group_b", 202, ["dev", "eli", "fay"], 600.0)
