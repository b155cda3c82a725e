//! Holds the `acceptance` test target, which trains and checks the full
//! model end to end. The library itself is empty.
