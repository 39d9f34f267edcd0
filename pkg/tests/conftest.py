import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
CORPUS_DIR = HERE.parent / "corpus"

# lets test modules import the shared generators in gen.py
sys.path.insert(0, str(HERE))
