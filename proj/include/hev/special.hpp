#pragma once

// Special functions used by the Dirichlet family. All require x > 0 and throw
// hev::DomainError otherwise.

namespace hev {

double log_gamma(double x);
double digamma(double x);
double trigamma(double x);

}  // namespace hev
