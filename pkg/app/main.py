"""
FastAPI application main entry point.

This module initializes the FastAPI application that exposes copy-move
clone detection, degradation and scoring over HTTP.
"""

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
import uvicorn

from app.api.routes import forensics
from app.core.config import settings
from app.core.errors import setup_exception_handlers
from app.core.logging import RequestLoggingMiddleware, app_logger


def create_app() -> FastAPI:
    """Create and configure FastAPI application."""

    app = FastAPI(
        title=settings.APP_NAME,
        description="""
## Intensity-Invariant Copy-Move Forgery Detection

Locates duplicated regions in an image even when the pasted copy has been
brightened or darkened, and survives JPEG recompression, additive noise and
Gaussian blur to a useful degree.

### Operations
- **Detect**: block DCT features, lexicographic sorting, shift-vector
  counting and morphological closing; returns source/destination masks
- **Degrade**: JPEG recompression, AWGN at a given SNR, Gaussian blur
- **Score**: pixel ACC / FP of detected masks against ground truth

### File Requirements
- PNG, BMP or JPEG images, 20MB max
- Masks as single-channel PNG, values above 127 are set
        """,
        version=settings.VERSION,
        docs_url="/docs",
        redoc_url="/redoc",
        openapi_url="/openapi.json"
    )

    app.add_middleware(
        CORSMiddleware,
        allow_origins=settings.CORS_ORIGINS,
        allow_credentials=True,
        allow_methods=["GET", "POST", "OPTIONS"],
        allow_headers=["*"],
    )

    setup_exception_handlers(app)

    app.add_middleware(RequestLoggingMiddleware, logger=app_logger)

    app.include_router(forensics.router, prefix="/api/v1/forensics", tags=["Forensics"])

    app_logger.info(f"{settings.APP_NAME} initialised", extra={
        "extra_fields": {
            "type": "startup",
            "version": settings.VERSION,
            "debug_mode": settings.DEBUG,
            "log_level": settings.LOG_LEVEL
        }
    })

    @app.get("/health",
             tags=["Health"],
             summary="Health Check",
             description="Check service health and operational status")
    async def health_check():
        """Service status, version and limits."""
        return JSONResponse(
            status_code=200,
            content={
                "status": "healthy",
                "service": "clone-detector",
                "version": settings.VERSION,
                "capabilities": {
                    "detection": True,
                    "olbm_baseline": True,
                    "degradation": True,
                    "scoring": True
                },
                "limits": {
                    "max_file_size_mb": settings.MAX_FILE_SIZE // (1024 * 1024),
                    "supported_formats": [ext.lstrip(".") for ext in settings.ALLOWED_EXTENSIONS]
                },
                "defaults": {
                    "block_size": settings.BLOCK_SIZE,
                    "th1": settings.TH1,
                    "th2": settings.TH2,
                    "method": settings.METHOD
                }
            }
        )

    @app.get("/",
             tags=["Root"],
             summary="API Information",
             description="Get API overview and navigation links")
    async def root():
        """API overview and navigation links."""
        return JSONResponse(
            content={
                "message": f"{settings.APP_NAME} - Copy-Move Forgery Detection",
                "version": settings.VERSION,
                "documentation": {
                    "interactive_docs": "/docs",
                    "redoc": "/redoc",
                    "openapi_schema": "/openapi.json"
                },
                "endpoints": {
                    "health": "/health",
                    "forensics": "/api/v1/forensics/",
                    "detect": "/api/v1/forensics/detect",
                    "degrade": "/api/v1/forensics/degrade",
                    "score": "/api/v1/forensics/score"
                }
            }
        )

    return app

# Create the FastAPI app instance
app = create_app()

if __name__ == "__main__":
    uvicorn.run(
        "app.main:app",
        host=settings.HOST,
        port=settings.PORT,
        reload=settings.DEBUG,
        log_level="info"
    )
