"""wavekd: distill engineered auditory filterbanks into learnable front ends."""

from .signal import Signal, ComplexSignal, strided_conv, analytic_signal, fft_convolve
from .dtcwt import MRAPyramid, dtcwt_forward, dtcwt_inverse, band_center_frequencies
from .wavelets import WaveletFilterSet, DEFAULT_FILTERS, filter_set_from_text
from .teachers import (
    TeacherSpec,
    Filterbank,
    Spectrogram,
    build_teacher,
    teacher_spectrogram,
    normalize_frames,
)
from .students import (
    ConvStudent,
    GaborStudent,
    MultiresStudent,
    StudentOutput,
    assign_octaves,
    gabor_kernel,
    mel_init,
)
from .distill import (
    AdamState,
    Distiller,
    LossValue,
    TeacherCache,
    TrainConfig,
    TrainingDiverged,
    adam_step,
    cosine_loss,
    loss_and_gradient,
    loss_gradient,
    sample_excerpt,
    split_dataset,
    train,
)
from .metrics import (
    LocalizationReport,
    evaluate,
    heisenberg_ratio,
    impulse_responses,
    localization_report,
)
from .data import (
    CorpusItem,
    load_model,
    load_spectrogram,
    load_wav_dir,
    save_model,
    save_spectrogram,
    synth_sine_dataset,
    synth_vowel_dataset,
    write_wav,
)

__all__ = [name for name in dir() if not name.startswith("_")]

__version__ = "0.1.0"
