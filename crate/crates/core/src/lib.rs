pub mod bits;
pub mod eek;
pub mod modmath;
pub mod learning;
pub mod dcr;
pub mod svm;
pub mod svmplus;
pub mod rydberg;
pub mod bench;
