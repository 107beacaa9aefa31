"""HTTP inference and fine-tuning service for the word-level backend protocol."""

from .models import ModelSlot, SlotConfig, TrainSettings
from .service import create_app, main

__version__ = "0.1.0"
