#pragma once

#include <vector>

// Literal per-row evaluations of the net-benefit definitions, written as
// plain loops over std::vector inputs so the library kernels can be checked
// against an independent implementation.
namespace bruteforce {

double nb_treat_all(const std::vector<double>& eval_risks, const std::vector<double>& w,
                    double z);

double nb_model(const std::vector<double>& decision_risks,
                const std::vector<double>& eval_risks, const std::vector<double>& w,
                double z, bool strict);

double nb_perfect(const std::vector<double>& eval_risks, const std::vector<double>& w,
                  double z, bool strict);

double empirical_nb(const std::vector<double>& decision_risks,
                    const std::vector<double>& y, const std::vector<double>& w, double z,
                    bool strict);

}  // namespace bruteforce
