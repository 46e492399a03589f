#!/usr/bin/env python3
"""
Startup script for the Clone Detector API.

This script runs the FastAPI application using uvicorn.
"""

import uvicorn

from app.core.config import settings

if __name__ == "__main__":
    uvicorn.run(
        "app.main:app",
        host=settings.HOST,
        port=settings.PORT,
        reload=settings.DEBUG,
        log_level=settings.LOG_LEVEL.lower()
    )
