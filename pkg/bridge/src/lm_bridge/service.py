"""FastAPI service exposing the word-level backend wire protocol.

Endpoints: POST /v1/distribution, POST /v1/generate, POST /v1/train,
GET /v1/train/{job_id}, GET /v1/vocab.  Training runs as a background job
per model slot; a second train request for a busy slot gets 409, inference
against a slot that has never been trained gets 503, malformed requests 400.
"""

from __future__ import annotations

import argparse
import itertools
import threading

import uvicorn
from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .models import ModelSlot, SlotConfig, TrainSettings


class DistributionRequest(BaseModel):
    model: str
    prefix: list[str] = Field(default_factory=list)


class GenerateRequest(BaseModel):
    model: str
    prefix: list[str] = Field(default_factory=list)
    mode: str = "greedy"
    temperature: float = 1.0
    top_k: int = 50
    max_len: int = 128
    stop: list[str] = Field(default_factory=list)
    seed: int = 0


class TrainRequest(BaseModel):
    model: str
    sequences: list[str]
    config: dict = Field(default_factory=dict)


def create_app(
    distribution_mode: str = "first_subword",
    d_model: int = 128,
    layers: int = 2,
    bpe_vocab_size: int = 800,
    device: str = "cpu",
) -> FastAPI:
    app = FastAPI(title="lm-bridge")
    slots = {
        role: ModelSlot(
            SlotConfig(
                role=role,
                d_model=d_model,
                layers=layers,
                bpe_vocab_size=bpe_vocab_size,
                distribution_mode=distribution_mode,
                device=device,
            )
        )
        for role in ("generator", "extractor")
    }
    jobs: dict[str, dict] = {}
    job_ids = itertools.count()
    jobs_lock = threading.Lock()

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    def get_slot(name: str) -> ModelSlot:
        slot = slots.get(name)
        if slot is None:
            raise HTTPException(status_code=400, detail=f"unknown model {name!r}")
        return slot

    def ready_slot(name: str) -> ModelSlot:
        slot = get_slot(name)
        if not slot.ready:
            raise HTTPException(status_code=503, detail=f"model {name!r} is not trained yet")
        return slot

    @app.post("/v1/distribution")
    def distribution(req: DistributionRequest):
        slot = ready_slot(req.model)
        return {"probs": slot.word_distribution(list(req.prefix))}

    @app.post("/v1/generate")
    def generate(req: GenerateRequest):
        if req.mode not in ("greedy", "sample"):
            raise HTTPException(status_code=400, detail=f"unknown mode {req.mode!r}")
        slot = ready_slot(req.model)
        tokens = slot.generate_words(
            list(req.prefix),
            mode=req.mode,
            temperature=req.temperature,
            top_k=req.top_k,
            max_len=req.max_len,
            stop=list(req.stop),
            seed=req.seed,
        )
        return {"tokens": tokens}

    @app.post("/v1/train")
    def train(req: TrainRequest):
        slot = get_slot(req.model)
        if not req.sequences:
            raise HTTPException(status_code=400, detail="sequences must be non-empty")
        if slot.training.is_set():
            raise HTTPException(status_code=409, detail=f"model {req.model!r} is training")
        slot.training.set()
        job_id = f"{req.model}-{next(job_ids)}"
        settings = TrainSettings.from_payload(req.config)
        with jobs_lock:
            jobs[job_id] = {"status": "running", "config": dict(req.config)}

        def run():
            try:
                slot.fit(list(req.sequences), settings)
                status = "done"
                error = None
            except Exception as e:  # job failures surface through the status
                status = "failed"
                error = str(e)
            finally:
                slot.training.clear()
            with jobs_lock:
                jobs[job_id]["status"] = status
                if error:
                    jobs[job_id]["error"] = error

        threading.Thread(target=run, daemon=True).start()
        return {"job_id": job_id}

    @app.get("/v1/train/{job_id}")
    def train_status(job_id: str):
        with jobs_lock:
            job = jobs.get(job_id)
            if job is None:
                raise HTTPException(status_code=400, detail=f"unknown job {job_id!r}")
            return dict(job)

    @app.get("/v1/vocab")
    def vocab(model: str):
        slot = get_slot(model)
        return {"tokens": list(slot.words)}

    return app


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="lm-bridge", description=__doc__)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--distribution-mode", choices=("first_subword", "exact"),
                        default="first_subword")
    parser.add_argument("--d-model", type=int, default=128)
    parser.add_argument("--layers", type=int, default=2)
    parser.add_argument("--bpe-vocab-size", type=int, default=800)
    args = parser.parse_args(argv)
    app = create_app(
        distribution_mode=args.distribution_mode,
        d_model=args.d_model,
        layers=args.layers,
        bpe_vocab_size=args.bpe_vocab_size,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
