"""Reads a heatmap written by the command line tool with Pillow."""
import json
import subprocess
import sys
import tempfile
from pathlib import Path

from PIL import Image


def run(cli, *args):
    subprocess.run([cli, *args], check=True, stdout=subprocess.DEVNULL)


def main():
    cli = sys.argv[1]
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        run(cli, "synth", "--out", str(root / "data"), "--n-categories", "3", "--seed", "2")
        run(cli, "train", "--data", str(root / "data"), "--out", str(root / "model"), "--epochs", "2")
        with open(root / "data" / "accounts.jsonl") as f:
            first = json.loads(f.readline())
        (root / "post.json").write_text(json.dumps({"visual_embedding": first["visual_pooled"]}))
        out = root / "heat.pgm"
        run(cli, "explain", "--checkpoint", str(root / "model" / "checkpoint.json"), "--post",
            str(root / "post.json"), "--out", str(out), "--upsample", "8x6")

        img = Image.open(out)
        assert img.format == "PPM", img.format
        assert img.mode == "L", img.mode
        assert img.size == (6, 8), img.size
        raw = out.read_bytes()
        header = b"P5\n6 8\n255\n"
        assert raw.startswith(header)
        assert img.tobytes() == raw[len(header):]
    print("ok")


if __name__ == "__main__":
    main()
