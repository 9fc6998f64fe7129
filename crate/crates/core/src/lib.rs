// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Placement density targets learned from a reference post-route placement,
//! adapted to a placer with empirical Bayes shrinkage and enforced through
//! cell inflation in a density-driven global placer.

pub mod clustering;
pub mod density;
pub mod ebayes;
pub mod error;
pub mod explore;
pub mod inflation;
pub mod netlist;
pub mod placer;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
