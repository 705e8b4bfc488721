"""HTTP front door for live campaigns.

Thin translation layer: JSON in, CampaignStore methods, JSON out.  All
domain rules (status checks, sequence fencing, degenerate-evidence
rejection) live in the store; here they only get mapped onto status
codes.  An optional static directory is mounted at /ui for the operator
console.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .campaign import CampaignError, CampaignStore, UnknownCampaignError

_STATUS = {"invalid": 400, "not-found": 404, "conflict": 409}


def create_app(data_dir: str | Path, ui_dir: str | Path | None = None) -> FastAPI:
    store = CampaignStore(data_dir)
    app = FastAPI(title="pooltest campaign service")
    app.state.store = store

    @app.exception_handler(CampaignError)
    async def _campaign_error(request: Request, exc: CampaignError):
        return JSONResponse(
            status_code=_STATUS.get(exc.kind, 400), content={"error": str(exc)}
        )

    @app.get("/campaigns")
    def list_campaigns():
        return {"campaigns": store.list_ids()}

    @app.post("/campaigns", status_code=201)
    async def create_campaign(request: Request):
        raw = await request.json()
        if not isinstance(raw, dict):
            raise CampaignError("campaign config must be a JSON object")
        return store.create(raw).public_view()

    @app.get("/campaigns/{campaign_id}")
    def get_campaign(campaign_id: str):
        return store.get(campaign_id).public_view()

    @app.post("/campaigns/{campaign_id}/proposal")
    def propose(campaign_id: str):
        return store.propose(campaign_id).public_view()

    @app.post("/campaigns/{campaign_id}/results")
    async def submit(campaign_id: str, request: Request):
        raw = await request.json()
        if not isinstance(raw, dict) or "outcomes" not in raw:
            raise CampaignError('body must be an object with an "outcomes" array')
        sequence = raw.get("sequence")
        if sequence is not None:
            if not isinstance(sequence, int):
                raise CampaignError("sequence must be an integer")
        return store.submit(campaign_id, raw["outcomes"], sequence).public_view()

    @app.get("/campaigns/{campaign_id}/marginal")
    def marginal(campaign_id: str):
        campaign = store.get(campaign_id)
        return {
            "id": campaign.config.id,
            "cycle": campaign.cycle,
            "marginal": [float(v) for v in campaign.marginal],
        }

    @app.get("/campaigns/{campaign_id}/events")
    def events(campaign_id: str):
        if campaign_id not in store.list_ids():
            raise UnknownCampaignError(f"no campaign {campaign_id!r}")
        return {"events": store.events(campaign_id)}

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
