#!/usr/bin/env python3
"""
Quick demo of quadflow: render a synthetic scene, interpolate it and score
both motion models against the ground truth.
"""
import os
import sys
import subprocess
from pathlib import Path

ROOT_DIR = Path(__file__).parent.absolute()
os.environ['PYTHONPATH'] = str(ROOT_DIR)

SCENE = ROOT_DIR / "scenes" / "accelerating_blob.txt"
DEMO_DIR = ROOT_DIR / "demo"


def _quadflow(*args: str) -> None:
    result = subprocess.run([sys.executable, "-m", "quadflow", *args], cwd=ROOT_DIR)
    if result.returncode != 0:
        print(f"❌ quadflow {args[0]} failed with exit code {result.returncode}")
        sys.exit(result.returncode)


def main():
    print("🎬 Rendering synthetic quartet...")
    _quadflow("synth", "--scene", str(SCENE), "--targets", "7", "--out", str(DEMO_DIR / "scene"))

    print("🚀 Interpolating the middle frame...")
    frames = [str(DEMO_DIR / "scene" / f"frame_{i}.pnm") for i in (-1, 0, 1, 2)]
    _quadflow("interpolate", "--in", *frames, "--t", "0.5", "--out", str(DEMO_DIR / "out"))

    print("📊 Scoring quadratic and linear models...")
    _quadflow("eval", "--scene", str(SCENE), "--models", "quadratic,linear")

    print(f"✅ Done. Frames written to {DEMO_DIR}")


if __name__ == "__main__":
    main()
