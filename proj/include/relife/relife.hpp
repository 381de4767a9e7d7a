#pragma once

#include "relife/clicksim.hpp"
#include "relife/config_io.hpp"
#include "relife/cpe.hpp"
#include "relife/datamodel.hpp"
#include "relife/encoders.hpp"
#include "relife/evaluation.hpp"
#include "relife/metrics.hpp"
#include "relife/model.hpp"
#include "relife/model_config.hpp"
#include "relife/nn/adam.hpp"
#include "relife/nn/checkpoint.hpp"
#include "relife/nn/gradcheck.hpp"
#include "relife/trainer.hpp"
#include "relife/gradcheck_suite.hpp"
