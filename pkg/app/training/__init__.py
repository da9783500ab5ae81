from app.training.augment import spec_augment
from app.training.ctc import ctc_loss
from app.training.optim import AdamW, AdamWState, adamw_step
from app.training.schedule import lr
from app.training.synthetic import gen_synthetic
