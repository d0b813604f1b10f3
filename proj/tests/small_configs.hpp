#pragma once

// Reduced study configurations that exercise every pipeline in seconds.

#include <string>

#include "lori/studies.hpp"

namespace lori::test {

inline ExperimentConfig small_config(const std::string& study) {
    ExperimentConfig c;
    c.study = study;
    c.seeds = {1, 2};
    c.fit.max_iters = 400;
    c.qlearning.episodes = 400;
    c.bc.max_iters = 60;
    c.birl.samples = 300;
    c.birl.burn_in = 100;
    c.birl.thin = 20;
    c.grid.z_bins = 8;
    c.grid.w_bins = 8;
    c.cancer.n_trajectories = 60;
    c.cancer.n_train = 120;
    c.cancer.n_test = 80;
    c.cancer.n_eval = 40;
    c.ksweep.k_true = 4;
    c.ksweep.dim = 3;
    c.ksweep.ks = {1, 2, 3};
    c.ksweep.n_train = 300;
    c.ksweep.n_test = 200;
    c.age.n_trajectories = 60;
    c.age.n_pairs = 150;
    c.age.curve_points = 5;
    c.allocation.n_events = 30;
    c.allocation.waitlist_size = 5;
    c.allocation.pool.pool_size = 40;
    c.allocation.curve_points = 4;
    return c;
}

}  // namespace lori::test
