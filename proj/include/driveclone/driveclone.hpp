#pragma once

#include "driveclone/error.hpp"
#include "driveclone/rng.hpp"
#include "driveclone/text.hpp"
#include "driveclone/report.hpp"
#include "driveclone/data/recording.hpp"
#include "driveclone/data/synth.hpp"
#include "driveclone/data/demonstrations.hpp"
#include "driveclone/data/split.hpp"
#include "driveclone/nn/numerics.hpp"
#include "driveclone/nn/mlp.hpp"
#include "driveclone/nn/adam.hpp"
#include "driveclone/nn/checkpoint.hpp"
#include "driveclone/mdn/mixture.hpp"
#include "driveclone/sim/kinematics.hpp"
#include "driveclone/sim/observation.hpp"
#include "driveclone/sim/simulator.hpp"
#include "driveclone/sim/highway_env.hpp"
#include "driveclone/bc/policy.hpp"
#include "driveclone/bc/train.hpp"
#include "driveclone/adversarial/discriminator.hpp"
#include "driveclone/adversarial/ppo.hpp"
#include "driveclone/adversarial/gan.hpp"
#include "driveclone/adversarial/gail.hpp"
#include "driveclone/eval/metrics.hpp"
#include "driveclone/eval/table.hpp"
#include "driveclone/cli/app.hpp"
