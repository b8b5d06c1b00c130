"""Binary-level APK feature extraction and small-network malware classification.

The pipeline: open the APK container, parse Dalvik executables and the binary
manifest straight from their bytes, match the findings against an ordered
feature dictionary into a fixed-length 0/1 vector, and classify it with one
of seven small recurrent/convolutional networks (float32 or int8-quantized).
"""

from importlib import resources

from .axml import ManifestInfo, XmlTree, decode_axml, extract_manifest_properties
from .container import ApkArchive, RawPayload, extract_raw_payload, open_apk, read_entry
from .dex import (
    ApiCall,
    DexFile,
    DexHeader,
    extract_api_calls,
    extract_api_calls_multi,
    parse_dex,
    parse_header,
    verify_checksum,
)
from .dictionary import (
    BehaviorDelta,
    FeatureDictionary,
    FeatureEntry,
    PruneConfig,
    build_dictionary,
    load_dictionary,
    prune_api_calls,
    save_dictionary,
    update_with_behaviors,
)
from .errors import ApkfeatError
from .inference import Prediction, forward_logits, predict, predict_batch, softmax
from .models import (
    CnnParams,
    Model,
    ModelSpec,
    QuantizedModel,
    load_any_model,
    load_model,
    load_quantized_model,
    save_model,
    save_quantized_model,
    tensor_schema,
)
from .pipeline import ScanResult, scan_apk
from .quantize import model_size_report, predict_quantized, quantize
from .vectorize import FeatureVector, text_to_vector, vector_to_text, vectorize

__version__ = "0.1.0"

DEFAULT_DICTIONARY_RESOURCE = "dictionary-v2.txt"


def default_dictionary_path() -> str:
    """Filesystem path of the bundled reference dictionary."""
    return str(resources.files("apkfeat").joinpath("data", DEFAULT_DICTIONARY_RESOURCE))
