"""Request/response bodies for the JSON flavor of the API."""

from pydantic import BaseModel, Field


class ColorizeJsonRequest(BaseModel):
    """Base64 alternative to the multipart form (multipart is preferred)."""

    line_art: str = Field(description="base64-encoded PNG, greyscale or RGB")
    strokes: str | None = Field(default=None, description="base64-encoded RGBA PNG, same size")
    model_id: str | None = Field(default=None, description="checkpoint id; latest when omitted")


class ColorizeJsonResponse(BaseModel):
    image: str = Field(description="base64-encoded RGB PNG")
    model_id: str
    request_id: str
    timing_ms: float


class ModelInfo(BaseModel):
    model_id: str
    iteration: int
    image_side: int
    generator_width: int


class ModelsResponse(BaseModel):
    models: list[ModelInfo]


class HealthResponse(BaseModel):
    status: str
    available: int = 0
    loaded: list[str] = []
