//! Network descriptions, shape validation, reference presets and model bundle I/O.

pub mod bundle;
pub mod desc;
pub mod presets;
pub mod validate;

pub use bundle::{
    generate_random_bundle, load_bundle, random_image, read_input_tensor, save_bundle, write_input_tensor,
    BundleError, LayerParams, ModelBundle, ENCODING_INPUT_SCALE,
};
pub use desc::{parse_network, parse_network_with, LayerKind, LayerSpec, NetworkDescription, ParseError, ParseErrorKind};
pub use presets::Preset;
pub use validate::{validate, AnnotatedLayer, AnnotatedNetwork, ValidationError};
