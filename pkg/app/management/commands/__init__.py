# fwn_test / fwn_simulate / fwn_mc
