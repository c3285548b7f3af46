#ifndef KCR_KCR_HPP
#define KCR_KCR_HPP

#include "kcr/augment.hpp"
#include "kcr/checkpoint.hpp"
#include "kcr/dataset.hpp"
#include "kcr/error.hpp"
#include "kcr/eval.hpp"
#include "kcr/layers.hpp"
#include "kcr/loss.hpp"
#include "kcr/model.hpp"
#include "kcr/optim.hpp"
#include "kcr/parallel.hpp"
#include "kcr/pnm.hpp"
#include "kcr/rng.hpp"
#include "kcr/synth.hpp"
#include "kcr/tensor.hpp"
#include "kcr/train.hpp"

#endif  // KCR_KCR_HPP
