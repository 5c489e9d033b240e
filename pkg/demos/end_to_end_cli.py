# Drive the command line end to end in a temp directory: write input
# files, fit a model, augment a corpus, score the augmentation, render
# the report.  Everything the pipeline reads and writes is shown.
#
#   python3 demos/end_to_end_cli.py

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np


def cli(*args, cwd):
    cmd = [sys.executable, "-m", "psda.cli", *map(str, args)]
    print("$ psda " + " ".join(map(str, args)))
    proc = subprocess.run(cmd, cwd=cwd, capture_output=True, text=True)
    if proc.returncode != 0:
        sys.stderr.write(proc.stderr)
        raise SystemExit(f"command failed with exit code {proc.returncode}")
    return proc.stdout


def write_inputs(root: Path, seed=13):
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(3, 6)) * 30.0
    for lang in ("aa", "bb"):
        lines = ["9 6"]
        for g in range(3):
            for w in range(3):
                vec = centers[g] + rng.normal(size=6) * 0.05
                lines.append(f"{lang}_g{g}_w{w} " + " ".join(repr(float(x)) for x in vec))
        (root / f"vec_{lang}.txt").write_text("\n".join(lines) + "\n")

    (root / "families.txt").write_text("germ: aa,bb\n")

    def svo(lang, s, v, o):
        rows = [(s, "NOUN", 2, "nsubj"), (v, "VERB", 0, "root"), (o, "NOUN", 2, "obj")]
        out = [f"# lang = {lang}"]
        for i, (form, upos, head, rel) in enumerate(rows, start=1):
            out.append("\t".join([str(i), form, form, upos, "_", "_", str(head), rel, "_", "_"]))
        return "\n".join(out)

    blocks = [
        svo("aa", "aa_g0_w0", "aa_g1_w0", "aa_g2_w0"),
        svo("bb", "bb_g0_w1", "bb_g1_w1", "bb_g2_w1"),
        svo("aa", "aa_g0_w2", "aa_g1_w2", "aa_g2_w2"),
    ]
    (root / "corpus.conllu").write_text("\n\n".join(blocks) + "\n")

    (root / "psda.cfg").write_text(
        "taxonomy = families.txt\n"
        "corpus = corpus.conllu\n"
        "embeddings.aa = vec_aa.txt\n"
        "embeddings.bb = vec_bb.txt\n"
        "k.single = 3\nk.family = 3\nk.multi = 3\n"
        "pos.dim = 4\n"
        "seed = 2\n"
        "copies = 2\n"
    )


def main():
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        write_inputs(root)
        print("inputs:", ", ".join(sorted(p.name for p in root.iterdir())))
        print()

        out = cli("cluster", "--config", "psda.cfg", "--out", "model.psda", cwd=root)
        summary = json.loads(out)
        print(json.dumps(summary, indent=2)[:400])
        print()

        cli("augment", "--config", "psda.cfg", "--model", "model.psda",
            "--out", "aug.jsonl", "--orig-out", "orig.jsonl", cwd=root)
        lines = (root / "aug.jsonl").read_text().splitlines()
        meta = json.loads(lines[0])["meta"]
        print("augment meta:", {k: meta[k] for k in ("stream", "matrix_file")})
        first = json.loads(lines[1])
        print("first record: id=%s source=%s lang=%s" % (first["id"], first["source"], first["lang"]))
        for rep in first["replacements"]:
            print("  %s %r -> %s:%s" % (rep["role"], rep["source_word"],
                                        rep["candidate_lang"], rep["candidate_word"]))
        print("records written:", len(lines) - 1, "(3 sentences x 2 copies)")
        print()

        out = cli("loss", "--config", "psda.cfg", "--orig", "orig.jsonl",
                  "--aug", "aug.jsonl", cwd=root)
        pairs = [json.loads(l) for l in out.splitlines()]
        agg = pairs.pop()["aggregate"]
        print("per-pair transport losses:",
              ["%.4f" % p["loss_ot"] for p in pairs])
        print("aggregate: pairs=%d mean_ot=%.6f mean_total=%.3f non_convergence=%s"
              % (agg["pairs"], agg["mean"]["loss_ot"], agg["mean"]["loss_total"],
                 agg["non_convergence_any"]))
        print()

        cli("report", "--model", "model.psda",
            "--out-csv", "report.csv", "--out-svg", "report.svg", cwd=root)
        csv_lines = (root / "report.csv").read_text().splitlines()
        print("report.csv:", csv_lines[0])
        print("  ", csv_lines[1])
        print("  ", csv_lines[2])
        print("   ... %d word rows total" % (len(csv_lines) - 2))
        svg = (root / "report.svg").read_text()
        print("report.svg: %d bytes, %d points plotted"
              % (len(svg), svg.count("<circle")))
        print()

        out = cli("gradcheck", "--instances", "5", cwd=root)
        g = json.loads(out)
        print("gradcheck: passed=%s checks=%d worst=%.2e"
              % (g["passed"], g["checks"], max(g["max_relative_error"].values())))


if __name__ == "__main__":
    main()
