from .dataset import (INPUT_LEN, SEQ_LEN, DatasetFormatError, TecDataset, build_sequences, contiguous_starts,
                      load_dataset, prepare, save_dataset, split, split_epoch)
from .ionex import IonexError, RawTecMap, parse_ionex, serialize_ionex
from .preprocess import (GEOGRAPHIC, HELIOCENTRIC, FrameSpaceError, TecMap, denormalize, from_heliocentric,
                         helio_shift, latitudes, longitudes, normalize, resize_to_72, to_heliocentric)
from .synth import SynthConfig, synth_arrays, synth_generate

__all__ = [
    "GEOGRAPHIC", "HELIOCENTRIC", "INPUT_LEN", "SEQ_LEN", "DatasetFormatError", "FrameSpaceError", "IonexError",
    "RawTecMap", "SynthConfig", "TecDataset", "TecMap", "build_sequences", "contiguous_starts", "denormalize",
    "from_heliocentric", "helio_shift", "latitudes", "load_dataset", "longitudes", "normalize", "parse_ionex",
    "prepare", "resize_to_72", "save_dataset", "serialize_ionex", "split", "split_epoch", "synth_arrays",
    "synth_generate", "to_heliocentric",
]
