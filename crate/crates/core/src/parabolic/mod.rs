//! First-return kernels to the free factors, induced Green functions and spectral
//! degeneracy.

mod degeneracy;
mod induced;
mod kernel;

pub use degeneracy::{
    degeneracy_test, DegeneracyOptions, DegeneracyReport, FactorVerdict, LadderRung, Verdict,
};
pub use induced::{
    induced_green, kernel_matrix, kernel_spectral_radius, FactorSpace, InducedGreen,
    KernelSpectrum,
};
pub use kernel::{
    first_return_kernel, first_return_kernel_exact, radial_return_kernel,
    radial_return_kernel_exact, ExactReturnKernel, KernelMethod, ReturnKernel,
};
