"""Serve the generation service with a freshly built stub checkpoint.

Usage: python3 scripts/serve_stub.py PORT
The stub model is a small untrained network; enough for contract-level
end-to-end flows (deterministic bytes, measured flow, transpositions).
"""

import sys
import tempfile
from pathlib import Path

import torch
import uvicorn

ROOT = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(ROOT / "tests"))

from conftest import stub_model  # noqa: E402

from emoflow.service import create_app  # noqa: E402
from emoflow.vamodel import save_checkpoint  # noqa: E402


def main():
    port = int(sys.argv[1]) if len(sys.argv) > 1 else 8731
    torch.manual_seed(0)
    ckpt = save_checkpoint(stub_model(), Path(tempfile.mkdtemp()) / "stub.zip",
                           version="stub-e2e")
    app = create_app(ckpt, max_bars=64)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")


if __name__ == "__main__":
    main()
