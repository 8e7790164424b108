FLAG = 'SHIFTING_LETTERS_ONE_STEP_AT_A_TIME'
