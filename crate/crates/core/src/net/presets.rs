//! Reference network topologies.

use crate::snn::Shape3;

use super::desc::{parse_network, NetworkDescription};

pub const MNIST_NET: &str = "64Conv(encoding)-MP2-64Conv-MP2-128fc-10fc";
pub const MNIST_INPUT: Shape3 = Shape3::new(1, 28, 28);

pub const CIFAR10_NET: &str = "128Conv(encoding)-128Conv-128Conv-MP2-192Conv-192Conv-192Conv-192Conv-MP2-\
256Conv-256Conv-256Conv-256Conv-MP2-256fc-10fc";
pub const CIFAR10_INPUT: Shape3 = Shape3::new(3, 32, 32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Mnist,
    Cifar10,
}

impl Preset {
    pub const ALL: [Preset; 2] = [Preset::Mnist, Preset::Cifar10];

    pub fn from_name(name: &str) -> Option<Preset> {
        match name.to_ascii_lowercase().as_str() {
            "mnist" => Some(Preset::Mnist),
            "cifar10" | "cifar-10" => Some(Preset::Cifar10),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Mnist => "mnist",
            Preset::Cifar10 => "cifar10",
        }
    }

    pub fn text(&self) -> &'static str {
        match self {
            Preset::Mnist => MNIST_NET,
            Preset::Cifar10 => CIFAR10_NET,
        }
    }

    pub fn input_shape(&self) -> Shape3 {
        match self {
            Preset::Mnist => MNIST_INPUT,
            Preset::Cifar10 => CIFAR10_INPUT,
        }
    }

    pub fn network(&self) -> NetworkDescription {
        parse_network(self.text()).expect("preset strings parse")
    }
}
