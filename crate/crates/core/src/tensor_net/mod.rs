//! Frozen convolutional feature extractors.

pub mod arch;
mod container;
pub mod init;
mod network;
pub mod ops;
mod spec;
mod tensor;

pub use container::{Dtype, RawTensor, WeightContainer, META_KEY};
pub use network::{Fire, LoadedNetwork};
pub use spec::{conv_out_dim, pool_out_dim, LayerKind, LayerSpec, NetworkSpec, Preprocess};
pub use tensor::{FeatureStack, ImageTensor, Tensor3};

/// Same as [`LoadedNetwork::load`].
pub fn load_network(spec: &NetworkSpec, container: &WeightContainer) -> crate::Result<LoadedNetwork> {
    LoadedNetwork::load(spec, container)
}

/// Same as [`LoadedNetwork::forward_extract`].
pub fn forward_extract(net: &LoadedNetwork, img: &ImageTensor) -> crate::Result<FeatureStack> {
    net.forward_extract(img)
}
