#pragma once

#include "tpla/error.hpp"
#include "tpla/numerics/kernels.hpp"
#include "tpla/numerics/matrix.hpp"
#include "tpla/numerics/orthogonal.hpp"
#include "tpla/numerics/rng.hpp"
#include "tpla/numerics/symmetric_eig.hpp"
#include "tpla/mla/attention.hpp"
#include "tpla/mla/config.hpp"
#include "tpla/mla/synthetic.hpp"
#include "tpla/mla/weights.hpp"
#include "tpla/reparam/transform.hpp"
#include "tpla/shard/collective.hpp"
#include "tpla/shard/plan.hpp"
#include "tpla/shard/sharded.hpp"
#include "tpla/pipeline/experiment.hpp"
#include "tpla/pipeline/pd_pipeline.hpp"
#include "tpla/cost/cost_model.hpp"
#include "tpla/io/container.hpp"
